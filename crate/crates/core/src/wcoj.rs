//! Generic worst-case optimal join over trie-indexed relations.

use std::collections::BTreeSet;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::query::{Query, Update, Var, VarSet};
use crate::storage::{IndexedRelation, ROOT};
use crate::value::{Tuple, Value};

/// One relation taking part in a join: trie `order` of `rel` whose levels
/// bind the global positions `levels` (strictly increasing).
#[derive(Clone, Copy)]
pub struct JoinInput<'a> {
    pub rel: &'a IndexedRelation,
    pub order: usize,
    pub levels: &'a [usize],
}

/// Which inputs bind each global position.
pub fn participants(inputs: &[JoinInput], nvars: usize) -> Vec<SmallVec<[usize; 4]>> {
    let mut parts = vec![SmallVec::new(); nvars];
    for (i, inp) in inputs.iter().enumerate() {
        for &p in inp.levels {
            parts[p].push(i);
        }
    }
    parts
}

/// Join `inputs` over `nvars` global positions with positions
/// `0..bound.len()` fixed to `bound`; `emit` sees the full binding.
pub fn join_with(
    inputs: &[JoinInput],
    parts: &[SmallVec<[usize; 4]>],
    nvars: usize,
    bound: &[Value],
    emit: &mut dyn FnMut(&[Value]),
) {
    let mut cur: SmallVec<[u32; 8]> = SmallVec::with_capacity(inputs.len());
    for inp in inputs {
        if inp.rel.arity() == 0 {
            if inp.rel.is_empty() {
                return;
            }
            cur.push(ROOT);
            continue;
        }
        let mut node = ROOT;
        for &p in inp.levels {
            if p >= bound.len() {
                break;
            }
            match inp.rel.child(inp.order, node, &bound[p]) {
                Some(c) => node = c,
                None => return,
            }
        }
        cur.push(node);
    }
    let mut binding: SmallVec<[Value; 12]> = SmallVec::from_slice(bound);
    binding.resize(nvars, Value::bits(crate::segtree::Bitstring::EMPTY));
    extend(inputs, parts, bound.len(), nvars, &mut binding, &mut cur, emit);
}

fn extend(
    inputs: &[JoinInput],
    parts: &[SmallVec<[usize; 4]>],
    p: usize,
    nvars: usize,
    binding: &mut [Value],
    cur: &mut [u32],
    emit: &mut dyn FnMut(&[Value]),
) {
    if p == nvars {
        emit(binding);
        return;
    }
    let ps = &parts[p];
    debug_assert!(!ps.is_empty(), "position {p} bound by no input");
    let mut best = ps[0];
    let mut best_n = inputs[best].rel.num_children(inputs[best].order, cur[best]);
    for &i in &ps[1..] {
        let n = inputs[i].rel.num_children(inputs[i].order, cur[i]);
        if n < best_n {
            best = i;
            best_n = n;
        }
    }
    let lead = inputs[best];
    let mut saved: SmallVec<[u32; 4]> = SmallVec::with_capacity(ps.len());
    for idx in 0..best_n {
        let (v, c) = lead.rel.child_at(lead.order, cur[best], idx);
        saved.clear();
        let mut ok = true;
        for &i in ps {
            saved.push(cur[i]);
        }
        for &i in ps {
            if i == best {
                cur[i] = c;
                continue;
            }
            match inputs[i].rel.child(inputs[i].order, cur[i], &v) {
                Some(n) => cur[i] = n,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            binding[p] = v;
            extend(inputs, parts, p + 1, nvars, binding, cur, emit);
        }
        for (k, &i) in ps.iter().enumerate() {
            cur[i] = saved[k];
        }
    }
}

/// Global variable order plus, per atom, the column order consistent with it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinPlan {
    pub order: Vec<Var>,
    /// `atom_orders[j]` lists schema positions of atom `j` sorted by `order`.
    pub atom_orders: Vec<Vec<usize>>,
    /// `levels[j]` are the global positions bound by atom `j`'s trie levels.
    pub levels: Vec<Vec<usize>>,
}

impl JoinPlan {
    pub fn new(q: &Query, order: Vec<Var>) -> Result<JoinPlan> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..q.num_vars()).collect::<Vec<_>>() {
            return Err(Error::Invalid("join order is not a permutation of the variables".into()));
        }
        let mut pos = vec![0; q.num_vars()];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let mut atom_orders = Vec::new();
        let mut levels = Vec::new();
        for a in &q.atoms {
            let mut cols: Vec<usize> = (0..a.schema.len()).collect();
            cols.sort_by_key(|&c| pos[a.schema[c]]);
            levels.push(cols.iter().map(|&c| pos[a.schema[c]]).collect());
            atom_orders.push(cols);
        }
        Ok(JoinPlan {
            order,
            atom_orders,
            levels,
        })
    }

    pub fn textual(q: &Query) -> JoinPlan {
        JoinPlan::new(q, (0..q.num_vars()).collect()).unwrap()
    }

    /// Variables of `atom` first, then the rest, each group in textual order.
    pub fn delta(q: &Query, atom: usize) -> JoinPlan {
        let own = q.atoms[atom].varset();
        let mut order: Vec<Var> = (0..q.num_vars()).filter(|v| own & (1 << v) != 0).collect();
        order.extend((0..q.num_vars()).filter(|v| own & (1 << v) == 0));
        JoinPlan::new(q, order).unwrap()
    }
}

/// One indexed relation per atom, columns in schema order.
#[derive(Clone, Debug)]
pub struct IndexedDatabase {
    pub rels: Vec<IndexedRelation>,
}

impl IndexedDatabase {
    pub fn new(q: &Query, plans: &[&JoinPlan]) -> IndexedDatabase {
        let rels = q
            .atoms
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let orders: Vec<Vec<usize>> = plans.iter().map(|p| p.atom_orders[j].clone()).collect();
                IndexedRelation::new(a.schema.len(), &orders).unwrap()
            })
            .collect();
        IndexedDatabase { rels }
    }

    /// Orders for the textual plan and for every atom's delta plan.
    pub fn for_query(q: &Query) -> IndexedDatabase {
        let mut plans = vec![JoinPlan::textual(q)];
        plans.extend((0..q.atoms.len()).map(|j| JoinPlan::delta(q, j)));
        let refs: Vec<&JoinPlan> = plans.iter().collect();
        IndexedDatabase::new(q, &refs)
    }

    pub fn from_relations(q: &Query, data: &[Vec<Tuple>]) -> IndexedDatabase {
        let mut db = IndexedDatabase::for_query(q);
        for (j, rows) in data.iter().enumerate() {
            for t in rows {
                db.rels[j].insert(t).unwrap();
            }
        }
        db
    }

    pub fn apply(&mut self, u: &Update) -> Result<bool> {
        let r = self
            .rels
            .get_mut(u.rel)
            .ok_or_else(|| Error::UnknownRelation(format!("#{}", u.rel)))?;
        match u.sign {
            crate::query::Sign::Insert => r.insert(&u.tuple),
            crate::query::Sign::Delete => r.delete(&u.tuple),
        }
    }

    pub fn size(&self) -> usize {
        self.rels.iter().map(|r| r.len()).sum()
    }
}

fn run_plan(
    q: &Query,
    plan: &JoinPlan,
    db: &IndexedDatabase,
    bound: &[Value],
    emit: &mut dyn FnMut(Tuple),
) -> Result<()> {
    let mut inputs = Vec::with_capacity(q.atoms.len());
    for (j, r) in db.rels.iter().enumerate() {
        let order = r
            .order_id(&plan.atom_orders[j])
            .ok_or_else(|| Error::Invalid(format!("missing index order for `{}`", q.atoms[j].relation)))?;
        inputs.push(JoinInput {
            rel: r,
            order,
            levels: &plan.levels[j],
        });
    }
    let parts = participants(&inputs, q.num_vars());
    let mut pos = vec![0; q.num_vars()];
    for (i, &v) in plan.order.iter().enumerate() {
        pos[v] = i;
    }
    join_with(&inputs, &parts, q.num_vars(), bound, &mut |b: &[Value]| {
        emit((0..pos.len()).map(|v| b[pos[v]]).collect());
    });
    Ok(())
}

/// Full join result, tuples over the query's variables in head order.
pub fn generic_join(q: &Query, plan: &JoinPlan, db: &IndexedDatabase) -> Result<Vec<Tuple>> {
    let mut out = Vec::new();
    run_plan(q, plan, db, &[], &mut |t| out.push(t))?;
    Ok(out)
}

/// Output tuples that use `tuple` for `atom`, i.e. the join with the atom's
/// variables fixed first.
pub fn delta_join(q: &Query, db: &IndexedDatabase, atom: usize, tuple: &[Value]) -> Result<Vec<Tuple>> {
    let a = &q.atoms[atom];
    if tuple.len() != a.schema.len() {
        return Err(Error::Arity {
            relation: a.relation.clone(),
            expected: a.schema.len(),
            got: tuple.len(),
        });
    }
    let plan = JoinPlan::delta(q, atom);
    let mut bound: SmallVec<[Value; 8]> = SmallVec::new();
    for &v in &plan.order[..a.schema.len()] {
        let c = a.schema.iter().position(|&x| x == v).unwrap();
        bound.push(tuple[c]);
    }
    let mut out = Vec::new();
    run_plan(q, &plan, db, &bound, &mut |t| out.push(t))?;
    Ok(out)
}

/// Nested-loop evaluation used as an oracle.
pub fn brute_force_join(q: &Query, data: &[Vec<Tuple>]) -> BTreeSet<Tuple> {
    fn rec(q: &Query, data: &[Vec<Tuple>], j: usize, binding: &mut Vec<Option<Value>>, out: &mut BTreeSet<Tuple>) {
        if j == q.atoms.len() {
            out.insert(binding.iter().map(|v| v.unwrap()).collect());
            return;
        }
        let schema = &q.atoms[j].schema;
        if schema.is_empty() {
            if !data[j].is_empty() {
                rec(q, data, j + 1, binding, out);
            }
            return;
        }
        for t in &data[j] {
            let saved = binding.clone();
            let ok = schema.iter().zip(t.iter()).all(|(&v, x)| match binding[v] {
                Some(y) => y == *x,
                None => {
                    binding[v] = Some(*x);
                    true
                }
            });
            if ok {
                rec(q, data, j + 1, binding, out);
            }
            *binding = saved;
        }
    }
    let mut out = BTreeSet::new();
    rec(q, data, 0, &mut vec![None; q.num_vars()], &mut out);
    out
}

/// Both sides of the query decomposition inequality for cover `weights`
/// and variables `y`: the sum over `y`-tuples of the residual AGM bounds,
/// and the AGM bound of the whole query (with `x^0 = 1`).
pub fn decomposition_sides(q: &Query, weights: &[f64], data: &[Vec<Tuple>], y: VarSet) -> (f64, f64) {
    let rhs: f64 = q
        .atoms
        .iter()
        .enumerate()
        .map(|(j, _)| pow0(data[j].len() as f64, weights[j]))
        .product();
    let yvars: Vec<Var> = (0..q.num_vars()).filter(|v| y & (1 << v) != 0).collect();
    let mut domains: Vec<Vec<Value>> = Vec::new();
    for &v in &yvars {
        let mut d: BTreeSet<Value> = BTreeSet::new();
        for (j, a) in q.atoms.iter().enumerate() {
            if let Some(c) = a.schema.iter().position(|&x| x == v) {
                d.extend(data[j].iter().map(|t| t[c]));
            }
        }
        domains.push(d.into_iter().collect());
    }
    let mut lhs = 0.0;
    let mut idx = vec![0usize; yvars.len()];
    if domains.iter().any(|d| d.is_empty()) {
        return (0.0, rhs);
    }
    loop {
        let mut term = 1.0;
        for (j, a) in q.atoms.iter().enumerate() {
            let cnt = data[j]
                .iter()
                .filter(|t| {
                    a.schema.iter().enumerate().all(|(c, &v)| match yvars.iter().position(|&x| x == v) {
                        Some(k) => t[c] == domains[k][idx[k]],
                        None => true,
                    })
                })
                .count();
            term *= pow0(cnt as f64, weights[j]);
        }
        lhs += term;
        let mut k = 0;
        loop {
            if k == idx.len() {
                return (lhs, rhs);
            }
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn pow0(x: f64, w: f64) -> f64 {
    if w == 0.0 {
        1.0
    } else {
        x.powf(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;
    use crate::value::tuple_of;

    fn tri() -> Query {
        parse_query("Q(A,B,C) :- R(A,B), S(B,C), T(A,C).").unwrap()
    }

    fn t(v: &[&str]) -> Tuple {
        tuple_of(v)
    }

    #[test]
    fn table_one_state_four() {
        let q = tri();
        let data = vec![
            vec![t(&["a1", "b1"])],
            vec![t(&["b1", "c1"]), t(&["b2", "c1"])],
            vec![t(&["a1", "c1"])],
        ];
        let db = IndexedDatabase::from_relations(&q, &data);
        let out = generic_join(&q, &JoinPlan::textual(&q), &db).unwrap();
        assert_eq!(out, vec![t(&["a1", "b1", "c1"])]);
        let d = delta_join(&q, &db, 2, &t(&["a1", "c1"])).unwrap();
        assert_eq!(d, vec![t(&["a1", "b1", "c1"])]);
    }

    #[test]
    fn delta_on_first_insert_is_empty() {
        let q = tri();
        let db = IndexedDatabase::from_relations(&q, &[vec![t(&["a1", "b1"])], vec![], vec![]]);
        assert!(delta_join(&q, &db, 0, &t(&["a1", "b1"])).unwrap().is_empty());
        assert!(generic_join(&q, &JoinPlan::textual(&q), &db).unwrap().is_empty());
        assert!(delta_join(&q, &db, 0, &t(&["a1"])).is_err());
    }

    #[test]
    fn single_atom_delta() {
        let q = parse_query("Q(A,B) :- R(A,B).").unwrap();
        let db = IndexedDatabase::from_relations(&q, &[vec![t(&["x", "y"])]]);
        assert_eq!(delta_join(&q, &db, 0, &t(&["x", "y"])).unwrap(), vec![t(&["x", "y"])]);
    }

    #[test]
    fn missing_order_is_reported() {
        let q = tri();
        let plan = JoinPlan::new(&q, vec![2, 1, 0]).unwrap();
        let db = IndexedDatabase::new(&q, &[&JoinPlan::textual(&q)]);
        assert!(generic_join(&q, &plan, &db).is_err());
        assert!(JoinPlan::new(&q, vec![0, 0, 1]).is_err());
    }
}
