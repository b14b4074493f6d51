//! Materialized bag views over a rooted tree decomposition.
//!
//! Node `t` keeps `Q'_t`, the join of its slot relations (atoms or atom
//! projections on the bag, plus the projections `P'_c` of its children), and
//! hands `P'_t = π_{Y_t} Q'_t` to its parent as a counted relation. In
//! top-down mode it also keeps `Q''_t = Q'_t ⋉ P''_t` with
//! `P''_t = π_{Y_t} Q''_parent`, so that every `Q''_t` is the projection of
//! the query result on the bag.

use std::collections::{HashMap, HashSet, VecDeque};

use smallvec::SmallVec;

use crate::lp::min_fractional_cover;
use crate::query::{Query, Var, VarSet};
use crate::segtree::Bitstring;
use crate::storage::IndexedRelation;
use crate::value::{Tuple, Value};
use crate::wcoj::{join_with, participants, JoinInput};
use crate::width::TreeDecomposition;

#[derive(Clone, Debug, Default)]
pub struct NetworkConfig {
    /// Support removals (bag views scanned by slot key).
    pub deletes: bool,
    /// Maintain the top-down views needed for delta enumeration.
    pub topdown: bool,
    /// Variables bound by the caller before walking from the root.
    pub root_prefix: Vec<Var>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlotSource {
    Atom { atom: usize, vars: VarSet },
    Child(usize),
}

#[derive(Clone, Debug)]
struct NetRel {
    vars: Vec<Var>,
    data: IndexedRelation,
    consumers: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
struct SlotInput {
    rel: usize,
    order: usize,
    levels: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Slot {
    source: SlotSource,
    rel: usize,
    inputs: Vec<SlotInput>,
    parts: Vec<SmallVec<[usize; 4]>>,
    /// Global position of each bag column in this slot's delta order.
    out_pos: Vec<usize>,
    /// Order of `Q'_t` with the slot columns first (deletes only).
    scan_order: Option<usize>,
}

#[derive(Clone, Debug)]
struct AtomInfo {
    /// Schema position of each column of the identity relation.
    perm: Vec<usize>,
    identity: usize,
    /// Derived projections: relation id and identity columns kept.
    projections: Vec<(usize, Vec<usize>)>,
    home: usize,
}

#[derive(Clone, Debug)]
struct Node {
    bag: VarSet,
    vars: Vec<Var>,
    parent: Option<usize>,
    children: Vec<usize>,
    slots: Vec<Slot>,
    q1: IndexedRelation,
    q1_yfirst: usize,
    /// Columns of `Y_t` in this bag and in the parent's bag.
    y_cols: Vec<usize>,
    y_in_parent: Vec<usize>,
    p1: Option<usize>,
    q2: Option<IndexedRelation>,
    p2: HashSet<Tuple>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Src {
    Q1(usize),
    Q2(usize),
}

#[derive(Clone, Debug)]
struct Step {
    src: Src,
    order: usize,
    prefix: Vec<Var>,
    suffix: Vec<Var>,
    cols: Vec<Var>,
}

#[derive(Clone, Debug)]
enum Event {
    Ins(usize, Tuple),
    Del(usize, Tuple),
    Down(usize, Tuple),
}

/// One bag view in plan order, e.g. `Q2'(B,C,D) = P1(B,C) ∧ S(B,C)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewDef {
    pub name: String,
    pub vars: Vec<String>,
    pub body: Vec<String>,
}

impl std::fmt::Display for ViewDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({})", self.name, self.vars.join(","))?;
        if !self.body.is_empty() {
            write!(f, " = {}", self.body.join(" ∧ "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    q: Query,
    td: TreeDecomposition,
    cfg: NetworkConfig,
    rels: Vec<NetRel>,
    atoms: Vec<AtomInfo>,
    nodes: Vec<Node>,
    full_walk: Vec<Step>,
    delta_walks: Vec<Vec<Step>>,
    pending: VecDeque<Event>,
}

fn blank() -> Value {
    Value::bits(Bitstring::EMPTY)
}

fn vars_in(s: VarSet) -> Vec<Var> {
    (0..32).filter(|v| s & (1 << v) != 0).collect()
}

/// Columns of `cols` (ascending variables) with those in `first` leading.
fn first_order(cols: &[Var], first: VarSet) -> Vec<usize> {
    let mut o: Vec<usize> = (0..cols.len()).filter(|&c| first & (1 << cols[c]) != 0).collect();
    o.extend((0..cols.len()).filter(|&c| first & (1 << cols[c]) == 0));
    o
}

fn project(t: &[Value], cols: &[usize]) -> Tuple {
    cols.iter().map(|&c| t[c]).collect()
}

fn positions(of: &[Var], within: &[Var]) -> Vec<usize> {
    of.iter().map(|v| within.iter().position(|x| x == v).unwrap()).collect()
}

/// Atoms that take part in a bag's join: contained atoms alone when they
/// cover the bag as well as all projections do, otherwise every atom that
/// meets the bag (projected).
fn bag_atoms(q: &Query, bag: VarSet) -> Vec<(usize, VarSet)> {
    let edges = q.edges();
    let contained: Vec<usize> = (0..edges.len()).filter(|&j| edges[j] != 0 && edges[j] & !bag == 0).collect();
    let meeting: Vec<usize> = (0..edges.len()).filter(|&j| edges[j] & bag != 0).collect();
    let cov = contained.iter().fold(0, |a, &j| a | edges[j]);
    let use_contained = cov == bag && {
        let c: Vec<VarSet> = contained.iter().map(|&j| edges[j]).collect();
        let all: Vec<VarSet> = meeting.iter().map(|&j| edges[j] & bag).collect();
        match (min_fractional_cover(&c, bag), min_fractional_cover(&all, bag)) {
            (Ok(a), Ok(b)) => a.objective == b.objective,
            _ => false,
        }
    };
    let chosen = if use_contained { contained } else { meeting };
    chosen.into_iter().map(|j| (j, edges[j] & bag)).collect()
}

impl Network {
    pub fn new(q: &Query, td: &TreeDecomposition, cfg: NetworkConfig) -> Network {
        assert!(!(cfg.deletes && cfg.topdown), "top-down views are insert-only");
        let n = td.len();
        let mut rels: Vec<NetRel> = Vec::new();
        let mut rel_of: HashMap<(usize, VarSet), usize> = HashMap::new();
        let new_rel = |rels: &mut Vec<NetRel>, vars: Vec<Var>| {
            rels.push(NetRel {
                data: IndexedRelation::new(vars.len(), &[]).unwrap(),
                vars,
                consumers: Vec::new(),
            });
            rels.len() - 1
        };

        // identity relations, one per atom
        let mut atoms: Vec<AtomInfo> = Vec::new();
        for (j, a) in q.atoms.iter().enumerate() {
            let vars = vars_in(a.varset());
            let perm = vars.iter().map(|v| a.schema.iter().position(|x| x == v).unwrap()).collect();
            let id = new_rel(&mut rels, vars);
            rel_of.insert((j, a.varset()), id);
            let home = if a.schema.is_empty() {
                td.root
            } else {
                td.first_containing(a.varset()).expect("atom not covered by any bag")
            };
            atoms.push(AtomInfo {
                perm,
                identity: id,
                projections: Vec::new(),
                home,
            });
        }

        // slot sources per node; child projections get their own relations
        let mut sources: Vec<Vec<(SlotSource, usize)>> = vec![Vec::new(); n];
        let mut p1 = vec![None; n];
        for t in 0..n {
            let bag = td.bags[t];
            for (j, s) in bag_atoms(q, bag) {
                let id = match rel_of.get(&(j, s)) {
                    Some(&id) => id,
                    None => {
                        let id = new_rel(&mut rels, vars_in(s));
                        rel_of.insert((j, s), id);
                        let idv = &rels[atoms[j].identity].vars;
                        let cols = positions(&vars_in(s), idv);
                        atoms[j].projections.push((id, cols));
                        id
                    }
                };
                sources[t].push((SlotSource::Atom { atom: j, vars: s }, id));
            }
            for (j, a) in q.atoms.iter().enumerate() {
                if a.schema.is_empty() && t == td.root {
                    sources[t].push((SlotSource::Atom { atom: j, vars: 0 }, atoms[j].identity));
                }
            }
        }
        for t in 0..n {
            if let Some(p) = td.parent[t] {
                let y = td.bags[t] & td.bags[p];
                let id = new_rel(&mut rels, vars_in(y));
                p1[t] = Some(id);
                sources[p].push((SlotSource::Child(t), id));
            }
        }

        // delta plans: collect the orders each relation must offer
        let mut rel_orders: Vec<Vec<Vec<usize>>> = rels.iter().map(|r| vec![(0..r.vars.len()).collect()]).collect();
        struct Proto {
            order: Vec<Var>,
        }
        let mut protos: Vec<Vec<Proto>> = Vec::new();
        for t in 0..n {
            let bag = td.bags[t];
            let mut ps = Vec::new();
            for (s, (_, rid)) in sources[t].iter().enumerate() {
                let sv = varset_of_rel(&rels[*rid].vars);
                let mut order = vars_in(sv);
                order.extend(vars_in(bag & !sv));
                let pos: HashMap<Var, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
                for (_, other) in &sources[t] {
                    let ov = &rels[*other].vars;
                    let mut cols: Vec<usize> = (0..ov.len()).collect();
                    cols.sort_by_key(|&c| pos[&ov[c]]);
                    if !rel_orders[*other].contains(&cols) {
                        rel_orders[*other].push(cols);
                    }
                }
                rels[*rid].consumers.push((t, s));
                ps.push(Proto { order });
            }
            protos.push(ps);
        }
        for (r, orders) in rels.iter_mut().zip(&rel_orders) {
            r.data = IndexedRelation::new(r.vars.len(), orders).unwrap();
        }

        // nodes
        let mut nodes: Vec<Node> = Vec::with_capacity(n);
        let root_prefix: VarSet = cfg.root_prefix.iter().fold(0, |a, v| a | (1 << v));
        for t in 0..n {
            let bag = td.bags[t];
            let vars = vars_in(bag);
            let y = td.parent[t].map_or(0, |p| bag & td.bags[p]);
            let mut q1_orders = vec![(0..vars.len()).collect::<Vec<_>>(), first_order(&vars, y)];
            if t == td.root {
                assert_eq!(root_prefix & !bag, 0, "root prefix outside the root bag");
                q1_orders.push(first_order(&vars, root_prefix));
            }
            if cfg.deletes {
                for (_, rid) in &sources[t] {
                    q1_orders.push(first_order(&vars, varset_of_rel(&rels[*rid].vars)));
                }
            }
            let q1 = IndexedRelation::new(vars.len(), &q1_orders).unwrap();
            let q1_yfirst = q1.order_id(&first_order(&vars, y)).unwrap();
            let q2 = cfg.topdown.then(|| {
                let mut o = vec![(0..vars.len()).collect::<Vec<_>>(), first_order(&vars, y)];
                for &c in &td.children[t] {
                    o.push(first_order(&vars, td.bags[c] & bag));
                }
                for (j, a) in atoms.iter().enumerate() {
                    if a.home == t {
                        o.push(first_order(&vars, q.atoms[j].varset()));
                    }
                }
                IndexedRelation::new(vars.len(), &o).unwrap()
            });
            let mut slots = Vec::new();
            for (s, (src, rid)) in sources[t].iter().enumerate() {
                let order = &protos[t][s].order;
                let pos: HashMap<Var, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
                let inputs: Vec<SlotInput> = sources[t]
                    .iter()
                    .map(|(_, other)| {
                        let ov = &rels[*other].vars;
                        let mut cols: Vec<usize> = (0..ov.len()).collect();
                        cols.sort_by_key(|&c| pos[&ov[c]]);
                        SlotInput {
                            rel: *other,
                            order: rels[*other].data.order_id(&cols).unwrap(),
                            levels: cols.iter().map(|&c| pos[&ov[c]]).collect(),
                        }
                    })
                    .collect();
                let ji: Vec<JoinInput> = inputs
                    .iter()
                    .map(|i| JoinInput {
                        rel: &rels[i.rel].data,
                        order: i.order,
                        levels: &i.levels,
                    })
                    .collect();
                let parts = participants(&ji, vars.len());
                let scan_order = cfg
                    .deletes
                    .then(|| q1.order_id(&first_order(&vars, varset_of_rel(&rels[*rid].vars))).unwrap());
                slots.push(Slot {
                    source: src.clone(),
                    rel: *rid,
                    inputs,
                    parts,
                    out_pos: vars.iter().map(|v| pos[v]).collect(),
                    scan_order,
                });
            }
            let yv = vars_in(y);
            nodes.push(Node {
                bag,
                y_cols: positions(&yv, &vars),
                y_in_parent: td.parent[t].map_or(Vec::new(), |p| positions(&yv, &vars_in(td.bags[p]))),
                vars,
                parent: td.parent[t],
                children: td.children[t].clone(),
                slots,
                q1,
                q1_yfirst,
                p1: p1[t],
                q2,
                p2: HashSet::new(),
            });
        }

        let mut net = Network {
            q: q.clone(),
            td: td.clone(),
            cfg,
            rels,
            atoms,
            nodes,
            full_walk: Vec::new(),
            delta_walks: Vec::new(),
            pending: VecDeque::new(),
        };
        net.full_walk = net.compile_full_walk();
        if net.cfg.topdown {
            net.delta_walks = (0..q.atoms.len()).map(|j| net.compile_delta_walk(j)).collect();
        }
        net
    }

    pub fn query(&self) -> &Query {
        &self.q
    }

    pub fn td(&self) -> &TreeDecomposition {
        &self.td
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    fn step(&self, src: Src, first: VarSet) -> Step {
        let t = match src {
            Src::Q1(t) | Src::Q2(t) => t,
        };
        let vars = &self.nodes[t].vars;
        let perm = first_order(vars, first);
        let rel = self.src_rel(src);
        Step {
            src,
            order: rel.order_id(&perm).expect("walk order not indexed"),
            prefix: vars_in(first & self.nodes[t].bag),
            suffix: vars_in(self.nodes[t].bag & !first),
            cols: vars.clone(),
        }
    }

    fn compile_full_walk(&self) -> Vec<Step> {
        let prefix: VarSet = self.cfg.root_prefix.iter().fold(0, |a, v| a | (1 << v));
        let mut steps = vec![self.step(Src::Q1(self.td.root), prefix)];
        for t in self.td.preorder().into_iter().skip(1) {
            let p = self.nodes[t].parent.unwrap();
            steps.push(self.step(Src::Q1(t), self.nodes[t].bag & self.nodes[p].bag));
        }
        steps
    }

    fn compile_delta_walk(&self, atom: usize) -> Vec<Step> {
        let h = self.atoms[atom].home;
        let mut steps = vec![self.step(Src::Q2(h), self.q.atoms[atom].varset())];
        let mut stack = vec![(h, usize::MAX)];
        while let Some((x, from)) = stack.pop() {
            let mut next: Vec<usize> = self.nodes[x].children.clone();
            if let Some(p) = self.nodes[x].parent {
                next.push(p);
            }
            for &m in next.iter().rev() {
                if m == from {
                    continue;
                }
                steps.push(self.step(Src::Q2(m), self.nodes[m].bag & self.nodes[x].bag));
                stack.push((m, x));
            }
        }
        // stack order visits later neighbours first; any order that grows a
        // connected subtree works
        steps
    }

    fn src_rel(&self, src: Src) -> &IndexedRelation {
        match src {
            Src::Q1(t) => &self.nodes[t].q1,
            Src::Q2(t) => self.nodes[t].q2.as_ref().expect("top-down views disabled"),
        }
    }

    // ------------------------------------------------------------ updates

    /// Apply a batch of base changes with multiset semantics: all removals
    /// are propagated before any addition. Tuples follow atom schemas.
    pub fn update(&mut self, removals: &[(usize, Tuple)], additions: &[(usize, Tuple)]) {
        if !removals.is_empty() {
            assert!(self.cfg.deletes, "network built without delete support");
            for (j, t) in removals {
                self.base_sub(*j, t);
            }
            self.drain();
        }
        for (j, t) in additions {
            self.base_add(*j, t);
        }
        self.drain();
    }

    pub fn add(&mut self, atom: usize, t: &[Value]) {
        self.base_add(atom, t);
        self.drain();
    }

    pub fn contains(&self, atom: usize, t: &[Value]) -> bool {
        self.multiplicity(atom, t) > 0
    }

    /// Distinct base tuples of `atom`, in schema order.
    pub fn base_tuples(&self, atom: usize) -> Vec<Tuple> {
        let a = &self.atoms[atom];
        self.rels[a.identity]
            .data
            .tuples()
            .into_iter()
            .map(|k| {
                let mut t: Tuple = k.clone();
                for (c, &p) in a.perm.iter().enumerate() {
                    t[p] = k[c];
                }
                t
            })
            .collect()
    }

    pub fn multiplicity(&self, atom: usize, t: &[Value]) -> u32 {
        let a = &self.atoms[atom];
        let key: Tuple = a.perm.iter().map(|&c| t[c]).collect();
        self.rels[a.identity].data.multiplicity(&key)
    }

    fn base_add(&mut self, j: usize, t: &[Value]) {
        let a = &self.atoms[j];
        let key: Tuple = a.perm.iter().map(|&c| t[c]).collect();
        if self.rels[a.identity].data.add(&key) {
            self.pending.push_back(Event::Ins(a.identity, key.clone()));
            for (pr, cols) in &a.projections {
                let p = project(&key, cols);
                if self.rels[*pr].data.add(&p) {
                    self.pending.push_back(Event::Ins(*pr, p));
                }
            }
        }
    }

    fn base_sub(&mut self, j: usize, t: &[Value]) {
        let a = &self.atoms[j];
        let key: Tuple = a.perm.iter().map(|&c| t[c]).collect();
        if self.rels[a.identity].data.sub(&key) {
            self.pending.push_back(Event::Del(a.identity, key.clone()));
            for (pr, cols) in &a.projections {
                let p = project(&key, cols);
                if self.rels[*pr].data.sub(&p) {
                    self.pending.push_back(Event::Del(*pr, p));
                }
            }
        }
    }

    fn drain(&mut self) {
        while let Some(ev) = self.pending.pop_front() {
            match ev {
                Event::Ins(r, key) => {
                    for i in 0..self.rels[r].consumers.len() {
                        let (t, s) = self.rels[r].consumers[i];
                        for u in self.delta(t, s, &key) {
                            self.add_q1(t, u);
                        }
                    }
                }
                Event::Del(r, key) => {
                    for i in 0..self.rels[r].consumers.len() {
                        let (t, s) = self.rels[r].consumers[i];
                        let node = &self.nodes[t];
                        let order = node.slots[s].scan_order.unwrap();
                        let mut gone = Vec::new();
                        node.q1.for_each_with_prefix(order, &key, |u| gone.push(Tuple::from_slice(u)));
                        for u in gone {
                            self.remove_q1(t, &u);
                        }
                    }
                }
                Event::Down(t, key) => {
                    let node = &self.nodes[t];
                    let mut fresh = Vec::new();
                    node.q1
                        .for_each_with_prefix(node.q1_yfirst, &key, |u| fresh.push(Tuple::from_slice(u)));
                    for u in fresh {
                        self.add_q2(t, u);
                    }
                }
            }
        }
    }

    /// New tuples of `Q'_t` caused by `key` appearing in slot `s`.
    fn delta(&self, t: usize, s: usize, key: &[Value]) -> Vec<Tuple> {
        let node = &self.nodes[t];
        let slot = &node.slots[s];
        let inputs: SmallVec<[JoinInput; 8]> = slot
            .inputs
            .iter()
            .map(|i| JoinInput {
                rel: &self.rels[i.rel].data,
                order: i.order,
                levels: &i.levels,
            })
            .collect();
        let mut out = Vec::new();
        let q1 = &node.q1;
        join_with(&inputs, &slot.parts, node.vars.len(), key, &mut |b: &[Value]| {
            let u: Tuple = slot.out_pos.iter().map(|&p| b[p]).collect();
            if !q1.contains(&u) {
                out.push(u);
            }
        });
        out
    }

    fn add_q1(&mut self, t: usize, u: Tuple) {
        let node = &mut self.nodes[t];
        if !node.q1.insert(&u).unwrap() {
            return;
        }
        if let Some(p) = node.p1 {
            let y = project(&u, &node.y_cols);
            if self.rels[p].data.add(&y) {
                self.pending.push_back(Event::Ins(p, y));
            }
        }
        if self.cfg.topdown {
            let node = &self.nodes[t];
            if node.parent.is_none() || node.p2.contains(&project(&u, &node.y_cols)) {
                self.add_q2(t, u);
            }
        }
    }

    fn remove_q1(&mut self, t: usize, u: &[Value]) {
        let node = &mut self.nodes[t];
        if !node.q1.delete(u).unwrap() {
            return;
        }
        if let Some(p) = node.p1 {
            let y = project(u, &node.y_cols);
            if self.rels[p].data.sub(&y) {
                self.pending.push_back(Event::Del(p, y));
            }
        }
    }

    fn add_q2(&mut self, t: usize, u: Tuple) {
        if !self.nodes[t].q2.as_mut().unwrap().insert(&u).unwrap() {
            return;
        }
        for i in 0..self.nodes[t].children.len() {
            let c = self.nodes[t].children[i];
            let y = project(&u, &self.nodes[c].y_in_parent);
            if self.nodes[c].p2.insert(y.clone()) {
                self.pending.push_back(Event::Down(c, y));
            }
        }
    }

    // ------------------------------------------------------------ reading

    /// Full result restricted to `prefix` values of the root prefix variables.
    pub fn enumerate(&self, prefix: &[Value]) -> Enumerator<'_> {
        assert_eq!(prefix.len(), self.cfg.root_prefix.len());
        let mut binding = vec![blank(); self.q.num_vars()];
        for (v, x) in self.cfg.root_prefix.iter().zip(prefix) {
            binding[*v] = *x;
        }
        Enumerator::new(self, &self.full_walk, binding)
    }

    /// Result tuples that use `tuple` (atom schema order) for `atom`.
    pub fn enumerate_with(&self, atom: usize, tuple: &[Value]) -> Enumerator<'_> {
        assert!(self.cfg.topdown, "top-down views disabled");
        let mut binding = vec![blank(); self.q.num_vars()];
        for (c, v) in self.q.atoms[atom].schema.iter().enumerate() {
            binding[*v] = tuple[c];
        }
        Enumerator::new(self, &self.delta_walks[atom], binding)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn bag_vars(&self, t: usize) -> &[Var] {
        &self.nodes[t].vars
    }

    /// `Q'_t` with columns in ascending variable order.
    pub fn view(&self, t: usize) -> Vec<Tuple> {
        self.nodes[t].q1.tuples()
    }

    pub fn topdown_view(&self, t: usize) -> Option<Vec<Tuple>> {
        self.nodes[t].q2.as_ref().map(|r| r.tuples())
    }

    pub fn slots(&self, t: usize) -> Vec<SlotSource> {
        self.nodes[t].slots.iter().map(|s| s.source.clone()).collect()
    }

    /// Sum of the sizes of all materialized relations.
    pub fn footprint(&self) -> usize {
        self.rels.iter().map(|r| r.data.len()).sum::<usize>()
            + self
                .nodes
                .iter()
                .map(|n| n.q1.len() + n.q2.as_ref().map_or(0, |r| r.len()) + n.p2.len())
                .sum::<usize>()
    }

    /// Node numbers in plan order (children before parents, 1-based).
    fn numbering(&self) -> Vec<usize> {
        let mut num = vec![0; self.nodes.len()];
        let mut next = 1;
        let mut stack = vec![(self.td.root, false)];
        while let Some((t, done)) = stack.pop() {
            if done {
                num[t] = next;
                next += 1;
            } else {
                stack.push((t, true));
                for &c in self.nodes[t].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        num
    }

    /// The maintained views, children first.
    pub fn plan(&self) -> Vec<ViewDef> {
        let num = self.numbering();
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by_key(|&t| num[t]);
        let names = |vs: &[Var]| -> Vec<String> { vs.iter().map(|&v| self.q.vars[v].clone()).collect() };
        let qname = |t: usize| {
            if self.nodes[t].children.is_empty() {
                format!("Q{}", num[t])
            } else {
                format!("Q{}'", num[t])
            }
        };
        let mut out = Vec::new();
        for &t in &order {
            let node = &self.nodes[t];
            let body = node
                .slots
                .iter()
                .map(|s| match &s.source {
                    SlotSource::Atom { atom, vars } => {
                        let a = &self.q.atoms[*atom];
                        if *vars == a.varset() {
                            format!("{}({})", a.relation, names(&a.schema).join(","))
                        } else {
                            format!("π{}({})", a.relation, names(&vars_in(*vars)).join(","))
                        }
                    }
                    SlotSource::Child(c) => {
                        format!("P{}({})", num[*c], names(&self.rels[s.rel].vars).join(","))
                    }
                })
                .collect();
            out.push(ViewDef {
                name: qname(t),
                vars: names(&node.vars),
                body,
            });
            if let Some(p) = node.p1 {
                out.push(ViewDef {
                    name: format!("P{}", num[t]),
                    vars: names(&self.rels[p].vars),
                    body: vec![format!("{}({})", qname(t), names(&node.vars).join(","))],
                });
            }
        }
        if self.cfg.topdown {
            for &t in &order {
                let node = &self.nodes[t];
                let Some(p) = node.parent else { continue };
                let yv: Vec<Var> = node.y_cols.iter().map(|&c| node.vars[c]).collect();
                let parent_src = if self.nodes[p].parent.is_none() {
                    qname(p)
                } else {
                    format!("Q{}''", num[p])
                };
                out.push(ViewDef {
                    name: format!("P{}''", num[t]),
                    vars: names(&yv),
                    body: vec![format!("{}({})", parent_src, names(&self.nodes[p].vars).join(","))],
                });
                out.push(ViewDef {
                    name: format!("Q{}''", num[t]),
                    vars: names(&node.vars),
                    body: vec![
                        format!("{}({})", qname(t), names(&node.vars).join(",")),
                        format!("P{}''({})", num[t], names(&yv).join(",")),
                    ],
                });
            }
        }
        out
    }

    /// Heads of the plan joined by `; `.
    pub fn plan_summary(&self) -> String {
        self.plan()
            .iter()
            .map(|d| format!("{}({})", d.name, d.vars.join(",")))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

fn varset_of_rel(vars: &[Var]) -> VarSet {
    vars.iter().fold(0, |a, v| a | (1 << v))
}

struct Level<'a> {
    rel: &'a IndexedRelation,
    order: usize,
    var: Var,
    lookup: Option<&'a [Var]>,
}

/// Lazy nested-loop walk over calibrated views; each call to `next` does
/// work bounded by the number of walk levels.
pub struct Enumerator<'a> {
    levels: Vec<Level<'a>>,
    check: Option<(&'a IndexedRelation, &'a [Var])>,
    binding: Vec<Value>,
    node: Vec<u32>,
    idx: Vec<usize>,
    cnt: Vec<usize>,
    child: Vec<u32>,
    state: u8,
}

impl<'a> Enumerator<'a> {
    fn new(net: &'a Network, steps: &'a [Step], binding: Vec<Value>) -> Enumerator<'a> {
        let mut levels = Vec::new();
        let mut check = None;
        for (i, st) in steps.iter().enumerate() {
            let rel = net.src_rel(st.src);
            if st.suffix.is_empty() {
                if i == 0 {
                    check = Some((rel, st.cols.as_slice()));
                }
                continue;
            }
            for (d, &v) in st.suffix.iter().enumerate() {
                levels.push(Level {
                    rel,
                    order: st.order,
                    var: v,
                    lookup: (d == 0).then_some(st.prefix.as_slice()),
                });
            }
        }
        let l = levels.len();
        Enumerator {
            levels,
            check,
            binding,
            node: vec![0; l],
            idx: vec![0; l],
            cnt: vec![0; l],
            child: vec![0; l],
            state: 0,
        }
    }

    fn enter(&mut self, d: usize) {
        let lv = &self.levels[d];
        let node = match lv.lookup {
            Some(pre) => {
                let key: SmallVec<[Value; 8]> = pre.iter().map(|&v| self.binding[v]).collect();
                lv.rel.node_at(lv.order, &key)
            }
            None => Some(self.child[d - 1]),
        };
        self.idx[d] = 0;
        match node {
            Some(n) => {
                self.node[d] = n;
                self.cnt[d] = lv.rel.num_children(lv.order, n);
            }
            None => self.cnt[d] = 0,
        }
    }

    fn emit(&self) -> Tuple {
        Tuple::from_slice(&self.binding)
    }
}

impl Iterator for Enumerator<'_> {
    type Item = Tuple;

    fn next(&mut self) -> Option<Tuple> {
        let l = self.levels.len();
        let mut d;
        match self.state {
            2 => return None,
            0 => {
                self.state = 1;
                if let Some((rel, cols)) = self.check {
                    let t: Tuple = cols.iter().map(|&v| self.binding[v]).collect();
                    if !rel.contains(&t) {
                        self.state = 2;
                        return None;
                    }
                }
                if l == 0 {
                    self.state = 2;
                    return Some(self.emit());
                }
                d = 0;
                self.enter(0);
            }
            _ => {
                d = l - 1;
                self.idx[d] += 1;
            }
        }
        loop {
            if self.idx[d] < self.cnt[d] {
                let lv = &self.levels[d];
                let (v, c) = lv.rel.child_at(lv.order, self.node[d], self.idx[d]);
                self.binding[lv.var] = v;
                self.child[d] = c;
                if d + 1 == l {
                    return Some(self.emit());
                }
                d += 1;
                self.enter(d);
            } else {
                if d == 0 {
                    self.state = 2;
                    return None;
                }
                d -= 1;
                self.idx[d] += 1;
            }
        }
    }
}
