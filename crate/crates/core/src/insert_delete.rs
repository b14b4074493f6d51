//! Maintenance under inserts and deletes through lifespans.
//!
//! Every base tuple carries a lifespan; a delete truncates the open span of
//! its tuple. Spans are stored per multivariate component as canonical
//! partitions over a segment tree of capacity `N` (open ends read as `N`),
//! and each component keeps bag views over its own decomposition.

use std::cell::Cell;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::insert_only::{check_arity, DeltaHandle, Mode};
use crate::network::{Enumerator, Network, NetworkConfig};
use crate::query::{Query, Sign, Update};
use crate::segtree::{cp_database, for_each_split, Bitstring, Interval, Lifespan, SegmentTree, TimedTuple};
use crate::value::{Tuple, Value};
use crate::width::{multivariate_extension, Component};

#[derive(Clone, Debug)]
struct ComponentState {
    comp: Component,
    net: Network,
}

/// Components of a query with empty networks.
#[derive(Debug)]
struct Blueprint {
    comps: Vec<ComponentState>,
    pos: Vec<Vec<usize>>,
}

/// Built once per query text; engines and resets clone the empty networks.
fn blueprint(q: &Query) -> Result<Arc<Blueprint>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<Blueprint>>>> = OnceLock::new();
    let key = q.to_string();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(b) = cache.lock().unwrap().get(&key) {
        return Ok(b.clone());
    }
    let mv = multivariate_extension(q)?;
    let mut comps = Vec::new();
    let mut pos = Vec::new();
    for comp in mv.components {
        let k = comp.k();
        let cfg = NetworkConfig {
            deletes: true,
            topdown: false,
            root_prefix: (0..k).collect(),
        };
        let net = Network::new(&comp.query, &comp.td.reroot(comp.enum_root), cfg);
        pos.push((0..k).map(|j| comp.position_of(j) + 1).collect());
        comps.push(ComponentState { comp, net });
    }
    let b = Arc::new(Blueprint { comps, pos });
    cache.lock().unwrap().insert(key, b.clone());
    Ok(b)
}

/// The lifespan engine without resets.
#[derive(Clone, Debug)]
pub struct LifespanEngine {
    q: Query,
    mode: Mode,
    comps: Vec<ComponentState>,
    blank: Arc<Blueprint>,
    /// `pos[c][j]`: number of Z columns of atom `j` in component `c`.
    pos: Vec<Vec<usize>>,
    n: u64,
    tau: u64,
    /// Start of the open span of every live tuple, per atom.
    open: Vec<HashMap<Tuple, u64>>,
    /// Closed spans (and, in delta mode, the point spans of every update).
    archive: Vec<Vec<(Interval, Tuple)>>,
    last_closed: u64,
    doublings: u64,
    /// Component tuples added or removed so far, replays included.
    row_ops: u64,
    collisions: Cell<u64>,
}

impl LifespanEngine {
    pub fn new(q: &Query, mode: Mode) -> Result<LifespanEngine> {
        LifespanEngine::with_capacity(q, mode, 1)
    }

    /// Start with a segment tree over `[1, n]` (`n` a power of two).
    pub fn with_capacity(q: &Query, mode: Mode, n: u64) -> Result<LifespanEngine> {
        SegmentTree::new(n)?;
        let blank = blueprint(q)?;
        Ok(LifespanEngine {
            q: q.clone(),
            mode,
            comps: blank.comps.clone(),
            pos: blank.pos.clone(),
            blank,
            n,
            tau: 0,
            open: vec![HashMap::new(); q.atoms.len()],
            archive: vec![Vec::new(); q.atoms.len()],
            last_closed: 0,
            doublings: 0,
            row_ops: 0,
            collisions: Cell::new(0),
        })
    }

    pub fn query(&self) -> &Query {
        &self.q
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn capacity(&self) -> u64 {
        self.n
    }

    pub fn timestamp(&self) -> u64 {
        self.tau
    }

    pub fn doublings(&self) -> u64 {
        self.doublings
    }

    pub fn row_ops(&self) -> u64 {
        self.row_ops
    }

    /// Output tuples suppressed because another component already emitted them.
    pub fn collisions(&self) -> u64 {
        self.collisions.get()
    }

    pub fn components(&self) -> impl Iterator<Item = &Component> {
        self.comps.iter().map(|c| &c.comp)
    }

    /// Number of live base tuples.
    pub fn size(&self) -> usize {
        self.open.iter().map(|m| m.len()).sum()
    }

    pub fn contains(&self, atom: usize, t: &[Value]) -> bool {
        self.open[atom].contains_key(t)
    }

    /// Live tuples per atom, in no particular order.
    pub fn live(&self) -> Vec<Vec<Tuple>> {
        self.open
            .iter()
            .map(|m| {
                let mut v: Vec<(u64, &Tuple)> = m.iter().map(|(t, &s)| (s, t)).collect();
                v.sort_unstable();
                v.into_iter().map(|(_, t)| t.clone()).collect()
            })
            .collect()
    }

    /// Live tuples with their relation, oldest first.
    fn live_in_order(&self) -> Vec<(usize, Tuple)> {
        let mut v: Vec<(u64, usize, &Tuple)> = Vec::new();
        for (j, m) in self.open.iter().enumerate() {
            v.extend(m.iter().map(|(t, &s)| (s, j, t)));
        }
        v.sort_unstable();
        v.into_iter().map(|(_, j, t)| (j, t.clone())).collect()
    }

    /// The timed database: closed spans, point spans and open spans.
    pub fn timed(&self) -> Vec<Vec<TimedTuple>> {
        (0..self.q.atoms.len())
            .map(|j| {
                let mut v: Vec<TimedTuple> = self.archive[j]
                    .iter()
                    .map(|(iv, t)| TimedTuple {
                        span: Lifespan::closed(iv.lo, iv.hi),
                        data: t.clone(),
                    })
                    .collect();
                v.extend(self.open[j].iter().map(|(t, &s)| TimedTuple {
                    span: Lifespan::open(s),
                    data: t.clone(),
                }));
                v
            })
            .collect()
    }

    fn bounded_spans(&self) -> Vec<Vec<(Interval, Tuple)>> {
        self.timed()
            .into_iter()
            .map(|v| v.into_iter().map(|tt| (tt.span.bounded(self.n), tt.data)).collect())
            .collect()
    }

    /// The stored component instance equals the canonical partition of the
    /// timed database, for every component.
    pub fn cp_invariant_holds(&self) -> bool {
        let spans = self.bounded_spans();
        self.comps.iter().all(|c| {
            let want = cp_database(self.n, &c.comp.perm, &spans).unwrap();
            (0..self.q.atoms.len()).all(|j| {
                let got: BTreeSet<Tuple> = c.net.base_tuples(j).into_iter().collect();
                got == want[j]
            })
        })
    }

    /// Stored tuples of atom `j` in component `c` (schema order, Z columns first).
    pub fn component_instance(&self, c: usize) -> Vec<Vec<Tuple>> {
        (0..self.q.atoms.len()).map(|j| self.comps[c].net.base_tuples(j)).collect()
    }

    fn rows(&self, c: usize, j: usize, nodes: &[Bitstring], t: &Tuple, out: &mut Vec<(usize, Tuple)>) {
        let parts = self.pos[c][j];
        for b in nodes {
            for_each_split(b, parts, |zs| {
                let mut row: Tuple = zs.iter().map(|z| Value::bits(*z)).collect();
                row.extend_from_slice(t);
                out.push((j, row));
            });
        }
    }

    /// Apply node-set changes for tuple `t` of atom `j` to every component.
    fn apply_nodes(&mut self, j: usize, t: &Tuple, gone: &[Bitstring], new: &[Bitstring]) {
        for c in 0..self.comps.len() {
            let mut rem = Vec::new();
            let mut add = Vec::new();
            self.rows(c, j, gone, t, &mut rem);
            self.rows(c, j, new, t, &mut add);
            self.row_ops += (rem.len() + add.len()) as u64;
            self.comps[c].net.update(&rem, &add);
        }
    }

    /// Same query and components, no data, capacity `n`.
    fn emptied(&self, n: u64) -> LifespanEngine {
        LifespanEngine {
            q: self.q.clone(),
            mode: self.mode,
            comps: self.blank.comps.clone(),
            blank: self.blank.clone(),
            pos: self.pos.clone(),
            n,
            tau: 0,
            open: vec![HashMap::new(); self.q.atoms.len()],
            archive: vec![Vec::new(); self.q.atoms.len()],
            last_closed: 0,
            doublings: 0,
            row_ops: 0,
            collisions: Cell::new(0),
        }
    }

    fn ensure_capacity(&mut self, need: u64) -> Result<()> {
        if need <= self.n {
            return Ok(());
        }
        let mut n = self.n;
        while n < need {
            n *= 2;
            self.doublings += 1;
        }
        SegmentTree::new(n)?;
        self.rebuild(n);
        Ok(())
    }

    fn rebuild(&mut self, n: u64) {
        let spans = {
            self.n = n;
            self.bounded_spans()
        };
        let st = SegmentTree::new(n).unwrap();
        self.comps = self.blank.comps.clone();
        for (j, rel) in spans.iter().enumerate() {
            for (iv, t) in rel {
                let nodes = st.cp(*iv).unwrap();
                self.apply_nodes(j, t, &[], &nodes);
            }
        }
    }

    pub fn insert(&mut self, rel: usize, tuple: Tuple) -> Result<DeltaHandle> {
        check_arity(&self.q, rel, &tuple)?;
        if self.open[rel].contains_key(&tuple) {
            return Err(Error::DuplicateInsert(self.q.atoms[rel].relation.clone()));
        }
        let tau = self.tau + 1;
        self.ensure_capacity(tau + 1)?;
        self.tau = tau;
        debug_assert!(self.last_closed < tau && self.open.iter().all(|m| m.values().all(|&s| s < tau)));
        let st = SegmentTree::new(self.n)?;
        let nodes = st.cp(Interval::new(tau, self.n))?;
        self.apply_nodes(rel, &tuple, &[], &nodes);
        if self.mode == Mode::Delta {
            self.apply_nodes(rel, &tuple, &[], &[st.leaf(tau)?]);
            self.archive[rel].push((Interval::new(tau, tau), tuple.clone()));
        }
        self.open[rel].insert(tuple.clone(), tau);
        Ok(DeltaHandle {
            tau,
            sign: Sign::Insert,
            atom: rel,
            tuple,
            changed: true,
        })
    }

    pub fn delete(&mut self, rel: usize, tuple: Tuple) -> Result<DeltaHandle> {
        check_arity(&self.q, rel, &tuple)?;
        let Some(&start) = self.open[rel].get(&tuple) else {
            return Err(Error::AbsentDelete(self.q.atoms[rel].relation.clone()));
        };
        let tau = self.tau + 1;
        self.ensure_capacity(tau + 1)?;
        self.tau = tau;
        // spans reaching past tau are all open
        debug_assert!(self.last_closed < tau);
        self.open[rel].remove(&tuple);
        let st = SegmentTree::new(self.n)?;
        let old = st.cp(Interval::new(start, self.n))?;
        let new = st.cp(Interval::new(start, tau))?;
        let gone: Vec<Bitstring> = old.iter().filter(|b| !new.contains(b)).copied().collect();
        let fresh: Vec<Bitstring> = new.iter().filter(|b| !old.contains(b)).copied().collect();
        self.apply_nodes(rel, &tuple, &gone, &fresh);
        self.archive[rel].push((Interval::new(start, tau), tuple.clone()));
        self.last_closed = tau;
        if self.mode == Mode::Delta {
            self.apply_nodes(rel, &tuple, &[], &[st.leaf(tau)?]);
            self.archive[rel].push((Interval::new(tau, tau), tuple.clone()));
        }
        Ok(DeltaHandle {
            tau,
            sign: Sign::Delete,
            atom: rel,
            tuple,
            changed: true,
        })
    }

    pub fn apply(&mut self, u: &Update) -> Result<DeltaHandle> {
        match u.sign {
            Sign::Insert => self.insert(u.rel, u.tuple.clone()),
            Sign::Delete => self.delete(u.rel, u.tuple.clone()),
        }
    }

    fn union<'a>(&'a self, jobs: Vec<(usize, Tuple)>) -> UnionEnum<'a> {
        UnionEnum {
            engine: self,
            jobs,
            next: 0,
            cur: None,
            seen: HashSet::new(),
        }
    }

    /// Current result: every component walked from its Z root with
    /// `z1∘…∘zk` ranging over prefixes of the leaf just after `τ`.
    pub fn enumerate_full(&self) -> UnionEnum<'_> {
        let st = SegmentTree::new(self.n).unwrap();
        let leaf = st.leaf(self.tau + 1).unwrap();
        let mut jobs = Vec::new();
        for p in 0..=leaf.len() {
            let pre = leaf.prefix(p);
            for (c, cs) in self.comps.iter().enumerate() {
                for_each_split(&pre, cs.comp.k(), |zs| {
                    jobs.push((c, zs.iter().map(|z| Value::bits(*z)).collect()));
                });
            }
        }
        self.union(jobs)
    }

    /// Signed change caused by the update behind `h`.
    pub fn enumerate_delta(&self, h: &DeltaHandle) -> Result<impl Iterator<Item = (Sign, Tuple)> + '_> {
        if self.mode != Mode::Delta {
            return Err(Error::Unsupported("delta enumeration needs delta mode".into()));
        }
        if h.tau != self.tau {
            return Err(Error::StaleHandle(h.tau, self.tau));
        }
        let st = SegmentTree::new(self.n)?;
        let leaf = st.leaf(self.tau)?;
        let mut jobs = Vec::new();
        for (c, cs) in self.comps.iter().enumerate() {
            for_each_split(&leaf, cs.comp.k(), |zs| {
                jobs.push((c, zs.iter().map(|z| Value::bits(*z)).collect()));
            });
        }
        let sign = h.sign;
        Ok(self.union(jobs).map(move |t| (sign, t)))
    }
}

/// Union of component walks with duplicate suppression.
pub struct UnionEnum<'a> {
    engine: &'a LifespanEngine,
    jobs: Vec<(usize, Tuple)>,
    next: usize,
    cur: Option<Enumerator<'a>>,
    seen: HashSet<Tuple>,
}

impl Iterator for UnionEnum<'_> {
    type Item = Tuple;

    fn next(&mut self) -> Option<Tuple> {
        loop {
            if let Some(e) = self.cur.as_mut() {
                if let Some(row) = e.next() {
                    let k = self.engine.q.atoms.len();
                    let t: Tuple = Tuple::from_slice(&row[k..]);
                    if self.seen.insert(t.clone()) {
                        return Some(t);
                    }
                    self.engine.collisions.set(self.engine.collisions.get() + 1);
                    continue;
                }
                self.cur = None;
            }
            let (c, zs) = self.jobs.get(self.next)?;
            self.next += 1;
            self.cur = Some(self.engine.comps[*c].net.enumerate(zs));
        }
    }
}

/// Fewest updates between resets; small databases would otherwise be
/// rebuilt on almost every update.
pub const MIN_EPOCH: u64 = 16;

/// Lifespan engine rebuilt from the live tuples after every
/// `max(MIN_EPOCH, ⌊|D|/2⌋)` updates, so stored history stays proportional to `|D|`.
#[derive(Clone, Debug)]
pub struct InsertDeleteEngine {
    inner: LifespanEngine,
    tau: u64,
    since_reset: u64,
    threshold: u64,
    resets: u64,
    last: Option<DeltaHandle>,
}

impl InsertDeleteEngine {
    pub fn new(q: &Query, mode: Mode) -> Result<InsertDeleteEngine> {
        Ok(InsertDeleteEngine {
            inner: LifespanEngine::new(q, mode)?,
            tau: 0,
            since_reset: 0,
            threshold: MIN_EPOCH,
            resets: 0,
            last: None,
        })
    }

    pub fn query(&self) -> &Query {
        self.inner.query()
    }

    pub fn inner(&self) -> &LifespanEngine {
        &self.inner
    }

    pub fn timestamp(&self) -> u64 {
        self.tau
    }

    pub fn resets(&self) -> u64 {
        self.resets
    }

    pub fn size(&self) -> usize {
        self.inner.size()
    }

    pub fn collisions(&self) -> u64 {
        self.inner.collisions()
    }

    pub fn contains(&self, atom: usize, t: &[Value]) -> bool {
        self.inner.contains(atom, t)
    }

    fn maybe_reset(&mut self) -> Result<()> {
        if self.since_reset < self.threshold {
            return Ok(());
        }
        let live = self.inner.live_in_order();
        let size = self.inner.size() as u64;
        // room for the replay and the whole next epoch, so no doubling happens before the next reset
        let cap = (size + (size / 2).max(MIN_EPOCH) + 1).next_power_of_two();
        let mut fresh = self.inner.emptied(cap);
        for (j, t) in live {
            fresh.insert(j, t)?;
        }
        fresh.collisions.set(self.inner.collisions());
        fresh.row_ops += self.inner.row_ops;
        self.inner = fresh;
        self.resets += 1;
        self.since_reset = 0;
        self.threshold = (self.inner.size() as u64 / 2).max(MIN_EPOCH);
        Ok(())
    }

    pub fn apply(&mut self, u: &Update) -> Result<DeltaHandle> {
        check_arity(&self.inner.q, u.rel, &u.tuple)?;
        let present = self.inner.contains(u.rel, &u.tuple);
        match u.sign {
            Sign::Insert if present => {
                return Err(Error::DuplicateInsert(self.inner.q.atoms[u.rel].relation.clone()))
            }
            Sign::Delete if !present => {
                return Err(Error::AbsentDelete(self.inner.q.atoms[u.rel].relation.clone()))
            }
            _ => {}
        }
        self.maybe_reset()?;
        let inner = self.inner.apply(u)?;
        self.since_reset += 1;
        self.tau += 1;
        let h = DeltaHandle {
            tau: self.tau,
            ..inner.clone()
        };
        self.last = Some(inner);
        Ok(h)
    }

    pub fn insert(&mut self, rel: usize, tuple: Tuple) -> Result<DeltaHandle> {
        self.apply(&Update::insert(rel, tuple))
    }

    pub fn delete(&mut self, rel: usize, tuple: Tuple) -> Result<DeltaHandle> {
        self.apply(&Update::delete(rel, tuple))
    }

    pub fn enumerate_full(&self) -> UnionEnum<'_> {
        self.inner.enumerate_full()
    }

    pub fn enumerate_delta(&self, h: &DeltaHandle) -> Result<impl Iterator<Item = (Sign, Tuple)> + '_> {
        if h.tau != self.tau {
            return Err(Error::StaleHandle(h.tau, self.tau));
        }
        let inner = self.last.as_ref().ok_or(Error::StaleHandle(h.tau, self.tau))?;
        self.inner.enumerate_delta(inner)
    }
}
