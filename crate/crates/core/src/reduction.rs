//! Static evaluation of intersection queries through components, and of
//! components through the lifespan engine.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::insert_delete::LifespanEngine;
use crate::insert_only::Mode;
use crate::query::{Query, Sign};
use crate::segtree::{cp, cp_database, g_map, h_map, interval_version, Bitstring, Interval, SegmentTree};
use crate::value::{Tuple, Value};
use rand::Rng;
use crate::wcoj::{generic_join, IndexedDatabase, JoinPlan};
use crate::width::{component_query, permutations};

/// Timed relations: one list of (interval, data tuple) per atom.
pub type TimedDatabase = Vec<Vec<(Interval, Tuple)>>;

/// Output of an intersection query: the intersected interval and the data values.
pub type TimedResult = BTreeSet<(Interval, Tuple)>;

/// Nested loops over all combinations of timed tuples.
pub fn brute_force_intersection_join(q: &Query, db: &TimedDatabase) -> TimedResult {
    fn rec(
        q: &Query,
        db: &TimedDatabase,
        j: usize,
        iv: Interval,
        binding: &mut Vec<Option<Value>>,
        out: &mut TimedResult,
    ) {
        if j == q.atoms.len() {
            out.insert((iv, binding.iter().map(|v| v.unwrap()).collect()));
            return;
        }
        for (span, t) in &db[j] {
            let Some(next) = iv.intersect(span) else { continue };
            let saved = binding.clone();
            let ok = q.atoms[j].schema.iter().zip(t.iter()).all(|(&v, x)| match binding[v] {
                Some(y) => y == *x,
                None => {
                    binding[v] = Some(*x);
                    true
                }
            });
            if ok {
                rec(q, db, j + 1, next, binding, out);
            }
            *binding = saved;
        }
    }
    let mut out = BTreeSet::new();
    rec(q, db, 0, Interval::new(1, u64::MAX), &mut vec![None; q.num_vars()], &mut out);
    out
}

/// Every (node, data) pair of the canonical partitions of `res`.
pub fn cp_of_result(n: u64, res: &TimedResult) -> Result<BTreeSet<(Bitstring, Tuple)>> {
    let mut out = BTreeSet::new();
    for (iv, t) in res {
        for b in cp(n, *iv)? {
            out.insert((b, t.clone()));
        }
    }
    Ok(out)
}

/// Component outputs with their Z prefix folded into one bitstring, over all components.
pub fn forward_nodes(q: &Query, n: u64, db: &TimedDatabase) -> Result<BTreeSet<(Bitstring, Tuple)>> {
    let k = q.atoms.len();
    let mut out = BTreeSet::new();
    for perm in permutations(k) {
        let inst = cp_database(n, &perm, db)?;
        let rows: Vec<Vec<Tuple>> = inst.into_iter().map(|s| s.into_iter().collect()).collect();
        for row in eval_component_direct(q, &perm, &rows)? {
            let g = g_map(k, &row)?;
            let b = g[0].as_bitstring().unwrap();
            out.insert((b, Tuple::from_slice(&g[1..])));
        }
    }
    Ok(out)
}

/// Merge segment-tree nodes per data tuple into maximal intervals.
pub fn merge_nodes(n: u64, nodes: &BTreeSet<(Bitstring, Tuple)>) -> Result<TimedResult> {
    let st = SegmentTree::new(n)?;
    let mut per: BTreeMap<Tuple, Vec<Interval>> = BTreeMap::new();
    for (b, t) in nodes {
        per.entry(t.clone()).or_default().push(st.seg(b)?);
    }
    let mut out = BTreeSet::new();
    for (t, mut ivs) in per {
        ivs.sort();
        let mut cur = ivs[0];
        for iv in &ivs[1..] {
            if iv.lo <= cur.hi + 1 {
                cur.hi = cur.hi.max(iv.hi);
            } else {
                out.insert((cur, t.clone()));
                cur = *iv;
            }
        }
        out.insert((cur, t));
    }
    Ok(out)
}

/// Intersection query answered through the components: canonical
/// partitions in, folded component outputs merged back into intervals.
pub fn forward_reduction(q: &Query, n: u64, db: &TimedDatabase) -> Result<TimedResult> {
    merge_nodes(n, &forward_nodes(q, n, db)?)
}

/// Component query of `perm` evaluated by a worst-case optimal join.
/// Rows are `Z1..Zk` followed by the base variables.
pub fn eval_component_direct(q: &Query, perm: &[usize], inst: &[Vec<Tuple>]) -> Result<BTreeSet<Tuple>> {
    let cq = component_query(q, perm);
    let db = IndexedDatabase::from_relations(&cq, inst);
    Ok(generic_join(&cq, &JoinPlan::textual(&cq), &db)?.into_iter().collect())
}

/// Rewrite Z values to fixed-length codes when lengths differ; returns the
/// code length and the decoding table.
fn fix_lengths(perm: &[usize], inst: &[Vec<Tuple>]) -> Result<(usize, Vec<Vec<Tuple>>, HashMap<Value, Value>)> {
    let mut values: BTreeSet<Bitstring> = BTreeSet::new();
    for (pos, &j) in perm.iter().enumerate() {
        for row in &inst[j] {
            for v in &row[..=pos] {
                let b = v
                    .as_bitstring()
                    .ok_or_else(|| Error::Invalid(format!("Z value {v} is not a bitstring")))?;
                values.insert(b);
            }
        }
    }
    let lens: BTreeSet<usize> = values.iter().map(|b| b.len()).collect();
    if lens.len() <= 1 {
        let ell = lens.into_iter().next().unwrap_or(0);
        return Ok((ell, inst.to_vec(), HashMap::new()));
    }
    let ell = (usize::BITS - (values.len() - 1).leading_zeros()) as usize;
    let mut enc = HashMap::new();
    let mut dec = HashMap::new();
    for (i, b) in values.iter().enumerate() {
        let code = Value::bits(Bitstring::new(ell, i as u64));
        enc.insert(Value::bits(*b), code);
        dec.insert(code, Value::bits(*b));
    }
    let mut out = inst.to_vec();
    for (pos, &j) in perm.iter().enumerate() {
        for row in out[j].iter_mut() {
            for v in row[..=pos].iter_mut() {
                *v = enc[v];
            }
        }
    }
    Ok((ell, out, dec))
}

/// Event of the sweep: one endpoint of one timed tuple.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SweepEvent {
    pub time: u64,
    /// Starts sort before ends at equal times.
    pub is_end: bool,
    pub rel: usize,
    pub tuple: Tuple,
}

/// Component query of `perm` evaluated by replaying the interval version of
/// `inst` as an insert/delete stream and pairing the signed deltas.
pub fn eval_component_via_ivm(q: &Query, perm: &[usize], inst: &[Vec<Tuple>]) -> Result<BTreeSet<Tuple>> {
    let k = perm.len();
    if inst.len() != q.atoms.len() {
        return Err(Error::Invalid("one relation per atom expected".into()));
    }
    let (ell, coded, dec) = fix_lengths(perm, inst)?;
    let (n, timed) = interval_version(perm, ell, &coded)?;
    let mut events = Vec::new();
    for (j, rel) in timed.iter().enumerate() {
        for (iv, t) in rel {
            events.push(SweepEvent { time: iv.lo, is_end: false, rel: j, tuple: t.clone() });
            events.push(SweepEvent { time: iv.hi, is_end: true, rel: j, tuple: t.clone() });
        }
    }
    events.sort();
    let mut engine = LifespanEngine::new(q, Mode::Delta)?;
    let mut open: HashMap<Tuple, VecDeque<u64>> = HashMap::new();
    let mut results: BTreeSet<(Interval, Tuple)> = BTreeSet::new();
    for ev in &events {
        let h = if ev.is_end {
            engine.delete(ev.rel, ev.tuple.clone())?
        } else {
            engine.insert(ev.rel, ev.tuple.clone())?
        };
        for (sign, t) in engine.enumerate_delta(&h)? {
            match sign {
                Sign::Insert => open.entry(t).or_default().push_back(ev.time),
                Sign::Delete => {
                    let start = open
                        .get_mut(&t)
                        .and_then(|q| q.pop_front())
                        .ok_or_else(|| Error::Invalid("unmatched removal in sweep".into()))?;
                    results.insert((Interval::new(start, ev.time), t));
                }
            }
        }
    }
    if open.values().any(|q| !q.is_empty()) {
        return Err(Error::Invalid("sweep ended with open results".into()));
    }
    let mut out = BTreeSet::new();
    for (iv, t) in results {
        for mut row in h_map(k, n, iv, &t)? {
            for v in row[..k].iter_mut() {
                if let Some(d) = dec.get(v) {
                    *v = *d;
                }
            }
            out.insert(row);
        }
    }
    Ok(out)
}

/// Concatenations `b1∘…∘bk` over permutations with `b1∘…∘bj` in the
/// canonical partition of the `j`-th interval of the permutation.
pub fn chained_witnesses(n: u64, intervals: &[Interval]) -> Result<BTreeSet<Bitstring>> {
    let parts: Vec<Vec<Bitstring>> = intervals.iter().map(|iv| cp(n, *iv)).collect::<Result<_>>()?;
    let mut out = BTreeSet::new();
    for perm in permutations(intervals.len()) {
        let mut stack: Vec<(usize, Bitstring)> = vec![(0, Bitstring::EMPTY)];
        while let Some((j, pre)) = stack.pop() {
            if j == perm.len() {
                out.insert(pre);
                continue;
            }
            for b in &parts[perm[j]] {
                if pre.is_prefix_of(b) {
                    stack.push((j + 1, *b));
                }
            }
        }
    }
    Ok(out)
}

/// Backward identity oracle: nested-loop intersection join over the
/// interval version, mapped back through `h_map`.
pub fn backward_oracle(q: &Query, perm: &[usize], ell: usize, inst: &[Vec<Tuple>]) -> Result<BTreeSet<Tuple>> {
    let (n, timed) = interval_version(perm, ell, inst)?;
    let mut out = BTreeSet::new();
    for (iv, t) in brute_force_intersection_join(q, &timed) {
        out.extend(h_map(perm.len(), n, iv, &t)?);
    }
    Ok(out)
}

fn random_data(rng: &mut impl Rng, arity: usize, domain: usize) -> Tuple {
    (0..arity).map(|_| Value::constant(&format!("v{}", rng.gen_range(0..domain)))).collect()
}

/// Random instance of the component of `perm`; Z values have length in
/// `lens` (a single length gives equal-length bitstrings).
pub fn random_component_instance(
    q: &Query,
    perm: &[usize],
    lens: std::ops::RangeInclusive<usize>,
    max_tuples: usize,
    domain: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<Tuple>> {
    let mut inst = vec![Vec::new(); q.atoms.len()];
    for (pos, &j) in perm.iter().enumerate() {
        let mut rows = BTreeSet::new();
        for _ in 0..rng.gen_range(0..=max_tuples) {
            let mut row: Tuple = (0..=pos)
                .map(|_| {
                    let len = rng.gen_range(lens.clone());
                    Value::bits(Bitstring::new(len, rng.gen_range(0..1u64 << len)))
                })
                .collect();
            row.extend(random_data(rng, q.atoms[j].schema.len(), domain));
            rows.insert(row);
        }
        inst[j] = rows.into_iter().collect();
    }
    inst
}

/// Random timed database with intervals inside `[1, n]`.
pub fn random_timed_database(q: &Query, n: u64, max_tuples: usize, domain: usize, rng: &mut impl Rng) -> TimedDatabase {
    q.atoms
        .iter()
        .map(|a| {
            let mut seen = BTreeSet::new();
            let mut rel = Vec::new();
            for _ in 0..rng.gen_range(0..=max_tuples) {
                let t = random_data(rng, a.schema.len(), domain);
                if seen.insert(t.clone()) {
                    let lo = rng.gen_range(1..=n);
                    let hi = rng.gen_range(lo..=n);
                    rel.push((Interval::new(lo, hi), t));
                }
            }
            rel
        })
        .collect()
}

/// Intersection of all intervals, if nonempty.
pub fn common_interval(ivs: &[Interval]) -> Option<Interval> {
    ivs.iter().try_fold(Interval::new(1, u64::MAX), |acc, iv| acc.intersect(iv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::TRIANGLE;
    use crate::query::parse_query;
    use crate::value::tuple_of;

    fn fig2() -> TimedDatabase {
        vec![
            vec![(Interval::new(1, 8), tuple_of(&["a1", "b1"]))],
            vec![
                (Interval::new(2, 5), tuple_of(&["b1", "c1"])),
                (Interval::new(4, 6), tuple_of(&["b2", "c1"])),
            ],
            vec![(Interval::new(3, 7), tuple_of(&["a1", "c1"]))],
        ]
    }

    fn bits(s: &str) -> Value {
        Value::bits(Bitstring::parse(s).unwrap())
    }

    #[test]
    fn figure_two_forward() {
        let q = parse_query(TRIANGLE).unwrap();
        let want: TimedResult = [(Interval::new(3, 5), tuple_of(&["a1", "b1", "c1"]))].into();
        assert_eq!(brute_force_intersection_join(&q, &fig2()), want);
        assert_eq!(forward_reduction(&q, 8, &fig2()).unwrap(), want);
        let nodes = forward_nodes(&q, 8, &fig2()).unwrap();
        assert_eq!(nodes, cp_of_result(8, &want).unwrap());
    }

    #[test]
    fn figure_two_component_123() {
        let q = parse_query(TRIANGLE).unwrap();
        let perm = [0, 1, 2];
        let inst: Vec<Vec<Tuple>> = cp_database(8, &perm, &fig2())
            .unwrap()
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect();
        let e = Value::bits(Bitstring::EMPTY);
        let row: Tuple = [e, bits("01"), e].into_iter().chain(tuple_of(&["a1", "b1", "c1"])).collect();
        let direct = eval_component_direct(&q, &perm, &inst).unwrap();
        assert_eq!(direct, [row].into());
        assert_eq!(eval_component_via_ivm(&q, &perm, &inst).unwrap(), direct);
        let empty = vec![Vec::new(); 3];
        assert!(eval_component_via_ivm(&q, &perm, &empty).unwrap().is_empty());
        assert!(eval_component_direct(&q, &perm, &empty).unwrap().is_empty());
    }

    #[test]
    fn three_interval_witnesses() {
        let ivs = [Interval::new(1, 8), Interval::new(2, 5), Interval::new(3, 7)];
        let w = chained_witnesses(8, &ivs).unwrap();
        let want: BTreeSet<Bitstring> = ["01", "100"].iter().map(|s| Bitstring::parse(s).unwrap()).collect();
        assert_eq!(w, want);
    }

    #[test]
    fn random_component_instances() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let q = parse_query(TRIANGLE).unwrap();
        let perms = permutations(3);
        for i in 0..50 {
            let perm = &perms[i % perms.len()];
            let ell = 1 + i % 3;
            let inst = random_component_instance(&q, perm, ell..=ell, 30, 3, &mut rng);
            let direct = eval_component_direct(&q, perm, &inst).unwrap();
            assert_eq!(eval_component_via_ivm(&q, perm, &inst).unwrap(), direct, "instance {i}");
            assert_eq!(backward_oracle(&q, perm, ell, &inst).unwrap(), direct, "instance {i}");
            let cq = component_query(&q, perm);
            assert_eq!(crate::wcoj::brute_force_join(&cq, &inst), direct);
        }
        for i in 0..20 {
            let perm = &perms[i % perms.len()];
            let inst = random_component_instance(&q, perm, 0..=3, 10, 2, &mut rng);
            let direct = eval_component_direct(&q, perm, &inst).unwrap();
            assert_eq!(eval_component_via_ivm(&q, perm, &inst).unwrap(), direct, "mixed lengths {i}");
        }
    }

    #[test]
    fn random_forward() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let q = parse_query(TRIANGLE).unwrap();
        for _ in 0..30 {
            let db = random_timed_database(&q, 16, 6, 2, &mut rng);
            let want = brute_force_intersection_join(&q, &db);
            assert_eq!(forward_nodes(&q, 16, &db).unwrap(), cp_of_result(16, &want).unwrap());
        }
    }

    #[test]
    fn non_bitstring_z_is_rejected() {
        let q = parse_query(TRIANGLE).unwrap();
        let inst = vec![vec![tuple_of(&["x", "a", "b"])], vec![], vec![]];
        assert!(eval_component_via_ivm(&q, &[0, 1, 2], &inst).is_err());
    }
}
