//! Widths of queries: ρ*, GYO, hierarchy, fhtw via elimination orders, and the
//! time and multivariate extensions.

use std::collections::HashMap;
use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lp::{min_fractional_cover, Cover, Rational, MAX_LP_VARS};
use crate::query::{vars_of, Atom, Query, Var, VarSet};

pub type FractionalEdgeCover = Cover;

pub fn rho_star(q: &Query) -> Result<(Rational, FractionalEdgeCover)> {
    let c = min_fractional_cover(&q.edges(), q.all_vars())?;
    Ok((c.objective, c))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GyoStep {
    /// `var` occurred only in `atom` and was dropped from it.
    RemoveVariable { var: Var, atom: usize },
    /// `atom` was empty or contained in `subsumed_by`.
    RemoveAtom { atom: usize, subsumed_by: Option<usize> },
}

/// GYO reduction; returns whether the query reduces to nothing, plus the trace.
pub fn gyo(q: &Query) -> (bool, Vec<GyoStep>) {
    let mut edges = q.edges();
    let mut alive = vec![true; edges.len()];
    let mut trace = Vec::new();
    loop {
        let mut changed = false;
        for v in 0..q.num_vars() {
            let holders: Vec<usize> = (0..edges.len())
                .filter(|&a| alive[a] && edges[a] & (1 << v) != 0)
                .collect();
            if holders.len() == 1 {
                edges[holders[0]] &= !(1 << v);
                trace.push(GyoStep::RemoveVariable { var: v, atom: holders[0] });
                changed = true;
            }
        }
        for a in 0..edges.len() {
            if !alive[a] {
                continue;
            }
            let into = if edges[a] == 0 {
                Some(None)
            } else {
                (0..edges.len())
                    .find(|&b| b != a && alive[b] && edges[a] & !edges[b] == 0)
                    .map(Some)
            };
            if let Some(by) = into {
                alive[a] = false;
                trace.push(GyoStep::RemoveAtom { atom: a, subsumed_by: by });
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (alive.iter().all(|a| !a), trace)
}

pub fn is_acyclic(q: &Query) -> bool {
    gyo(q).0
}

pub fn is_hierarchical(q: &Query) -> bool {
    let at: Vec<u64> = (0..q.num_vars())
        .map(|v| q.atoms_of(v).iter().fold(0u64, |s, &a| s | (1 << a)))
        .collect();
    for x in 0..at.len() {
        for y in x + 1..at.len() {
            let (a, b) = (at[x], at[y]);
            if !(a & !b == 0 || b & !a == 0 || a & b == 0) {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationOrder {
    pub order: Vec<Var>,
    /// `u_sets[i]` is the set of variables co-occurring with `order[i]` when it is eliminated.
    pub u_sets: Vec<VarSet>,
    pub width: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub bags: Vec<VarSet>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub root: usize,
    pub covers: Vec<Cover>,
    pub width: Rational,
}

impl TreeDecomposition {
    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            for &c in self.children[n].iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    /// Same tree with a different root.
    pub fn reroot(&self, root: usize) -> TreeDecomposition {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for (c, p) in self.parent.iter().enumerate() {
            if let Some(p) = *p {
                adj[p].push(c);
                adj[c].push(p);
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
        }
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some(x);
                    children[x].push(y);
                    stack.push(y);
                }
            }
        }
        TreeDecomposition {
            bags: self.bags.clone(),
            parent,
            children,
            root,
            covers: self.covers.clone(),
            width: self.width,
        }
    }

    /// Coverage of every atom and connectedness of every variable's bags.
    pub fn is_valid_for(&self, q: &Query) -> bool {
        if !q.atoms.iter().all(|a| self.bags.iter().any(|b| a.varset() & !b == 0)) {
            return false;
        }
        for v in 0..q.num_vars() {
            let holders: Vec<usize> = (0..self.len()).filter(|&n| self.bags[n] & (1 << v) != 0).collect();
            if holders.is_empty() {
                return false;
            }
            // connected iff exactly one holder has its parent outside the set
            let tops = holders
                .iter()
                .filter(|&&n| self.parent[n].map_or(true, |p| self.bags[p] & (1 << v) == 0))
                .count();
            if tops != 1 {
                return false;
            }
        }
        true
    }

    pub fn first_containing(&self, s: VarSet) -> Option<usize> {
        self.preorder().into_iter().find(|&n| s & !self.bags[n] == 0)
    }
}

struct WidthSolver {
    edges: Vec<VarSet>,
    n: usize,
    /// Z variables in index order; their elimination is restricted.
    z: Vec<Var>,
    rho: HashMap<VarSet, Rational>,
    memo: HashMap<VarSet, (Rational, Var)>,
}

impl WidthSolver {
    fn new(q: &Query, z: Vec<Var>) -> Result<WidthSolver> {
        if q.num_vars() > MAX_LP_VARS {
            return Err(Error::Budget(format!(
                "{} variables exceed {MAX_LP_VARS}",
                q.num_vars()
            )));
        }
        Ok(WidthSolver {
            edges: q.edges(),
            n: q.num_vars(),
            z,
            rho: HashMap::new(),
            memo: HashMap::new(),
        })
    }

    fn rho(&mut self, u: VarSet) -> Result<Rational> {
        if let Some(r) = self.rho.get(&u) {
            return Ok(*r);
        }
        let r = min_fractional_cover(&self.edges, u)?.objective;
        self.rho.insert(u, r);
        Ok(r)
    }

    /// Variables of the merged hyperedge containing `x` after eliminating `s`.
    fn u_set(&self, s: VarSet, x: Var) -> VarSet {
        let mut reach: VarSet = 1 << x;
        let mut used = vec![false; self.edges.len()];
        let mut frontier: VarSet = 1 << x;
        while frontier != 0 {
            let mut next = 0;
            for (i, &e) in self.edges.iter().enumerate() {
                if !used[i] && e & frontier != 0 {
                    used[i] = true;
                    next |= e & !reach;
                    reach |= e;
                }
            }
            frontier = next & s;
        }
        reach & !s
    }

    fn allowed(&self, x: Var, u: VarSet) -> bool {
        match self.z.iter().position(|&z| z == x) {
            Some(i) => self.z[i + 1..].iter().all(|&later| u & (1 << later) == 0),
            None => true,
        }
    }

    fn best(&mut self, s: VarSet) -> Result<Rational> {
        let all = if self.n == 32 { u32::MAX } else { (1u32 << self.n) - 1 };
        if s == all {
            return Ok(Rational::zero());
        }
        if let Some(&(w, _)) = self.memo.get(&s) {
            return Ok(w);
        }
        let mut best: Option<(Rational, Var)> = None;
        for x in 0..self.n {
            if s & (1 << x) != 0 {
                continue;
            }
            let u = self.u_set(s, x);
            if !self.allowed(x, u) {
                continue;
            }
            let step = self.rho(u)?;
            if let Some((b, _)) = best {
                if step >= b {
                    continue;
                }
            }
            let rest = self.best(s | (1 << x))?;
            let w = if step > rest { step } else { rest };
            if best.map_or(true, |(b, _)| w < b) {
                best = Some((w, x));
            }
        }
        let best = best.ok_or_else(|| Error::Invalid("no admissible elimination step".into()))?;
        self.memo.insert(s, best);
        Ok(best.0)
    }

    fn order(&mut self) -> Result<EliminationOrder> {
        let width = self.best(0)?;
        let mut s = 0;
        let mut order = Vec::new();
        let mut u_sets = Vec::new();
        while order.len() < self.n {
            let x = self.memo[&s].1;
            u_sets.push(self.u_set(s, x));
            order.push(x);
            s |= 1 << x;
        }
        Ok(EliminationOrder { order, u_sets, width })
    }
}

/// Tree decomposition induced by an elimination order, with subsumed bags merged.
pub fn td_from_order(q: &Query, eo: &EliminationOrder) -> Result<TreeDecomposition> {
    let n = eo.order.len();
    if n == 0 {
        return Err(Error::Invalid("query without variables".into()));
    }
    let mut pos = vec![0; q.num_vars()];
    for (i, &v) in eo.order.iter().enumerate() {
        pos[v] = i;
    }
    let mut bags = eo.u_sets.clone();
    let mut parent: Vec<Option<usize>> = (0..n)
        .map(|i| {
            vars_of(bags[i] & !(1 << eo.order[i]))
                .into_iter()
                .map(|v| pos[v])
                .min()
        })
        .collect();
    let root = n - 1;
    for (i, p) in parent.iter_mut().enumerate() {
        if p.is_none() && i != root {
            *p = Some(root);
        }
    }
    let mut alive = vec![true; n];
    loop {
        let found = (0..n).find(|&c| {
            alive[c]
                && parent[c].map_or(false, |p| {
                    let (bc, bp) = (bags[c], bags[p]);
                    bc & !bp == 0 || bp & !bc == 0
                })
        });
        let Some(c) = found else { break };
        let p = parent[c].unwrap();
        bags[p] |= bags[c];
        alive[c] = false;
        for x in 0..n {
            if alive[x] && parent[x] == Some(c) {
                parent[x] = Some(p);
            }
        }
    }
    // compact in preorder
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    for x in 0..n {
        if alive[x] {
            if let Some(p) = parent[x] {
                kids[p].push(x);
            }
        }
    }
    let mut order = Vec::new();
    let mut stack = vec![root];
    while let Some(x) = stack.pop() {
        order.push(x);
        for &c in kids[x].iter().rev() {
            stack.push(c);
        }
    }
    let mut idx = vec![usize::MAX; n];
    for (i, &x) in order.iter().enumerate() {
        idx[x] = i;
    }
    let edges = q.edges();
    let mut td = TreeDecomposition {
        bags: order.iter().map(|&x| bags[x]).collect(),
        parent: order.iter().map(|&x| parent[x].map(|p| idx[p])).collect(),
        children: order.iter().map(|&x| kids[x].iter().map(|&c| idx[c]).collect()).collect(),
        root: 0,
        covers: Vec::new(),
        width: Rational::zero(),
    };
    for &b in &td.bags {
        let c = min_fractional_cover(&edges, b)?;
        if c.objective > td.width {
            td.width = c.objective;
        }
        td.covers.push(c);
    }
    Ok(td)
}

fn solve(q: &Query, z: Vec<Var>) -> Result<(EliminationOrder, TreeDecomposition)> {
    let mut s = WidthSolver::new(q, z)?;
    let eo = s.order()?;
    let td = td_from_order(q, &eo)?;
    debug_assert_eq!(td.width, eo.width);
    Ok((eo, td))
}

/// Fractional hypertree width with an optimal decomposition.
pub fn fhtw(q: &Query) -> Result<(Rational, TreeDecomposition)> {
    let (eo, td) = solve(q, Vec::new())?;
    Ok((eo.width, td))
}

pub fn optimal_order(q: &Query) -> Result<EliminationOrder> {
    WidthSolver::new(q, Vec::new())?.order()
}

/// fhtw over elimination orders that keep the given Z variables prefix-closed.
pub fn fhtw_prefix_closed(q: &Query, z: &[Var]) -> Result<(EliminationOrder, TreeDecomposition)> {
    solve(q, z.to_vec())
}

#[derive(Clone, Debug)]
pub struct TimeExtension {
    pub base: Query,
    pub extended: Query,
    pub interval_var: Var,
}

pub fn time_extension(q: &Query) -> TimeExtension {
    let mut vars = vec!["[Z]".to_string()];
    vars.extend(q.vars.iter().cloned());
    let atoms = q
        .atoms
        .iter()
        .map(|a| Atom {
            relation: a.relation.clone(),
            schema: std::iter::once(0).chain(a.schema.iter().map(|v| v + 1)).collect(),
        })
        .collect();
    TimeExtension {
        base: q.clone(),
        extended: Query {
            name: q.name.clone(),
            vars,
            atoms,
        },
        interval_var: 0,
    }
}

#[derive(Clone, Debug)]
pub struct Component {
    /// `perm[i]` is the base atom at position `i+1`.
    pub perm: Vec<usize>,
    /// Variables `Z1..Zk` are `0..k`, base variable `v` is `k+v`; atom `j`
    /// keeps index `j`.
    pub query: Query,
    pub order: EliminationOrder,
    pub td: TreeDecomposition,
    pub width: Rational,
    /// Node whose bag holds all Z variables.
    pub enum_root: usize,
}

impl Component {
    pub fn k(&self) -> usize {
        self.perm.len()
    }

    /// 1-based permutation label such as `132`.
    pub fn label(&self) -> String {
        perm_label(&self.perm)
    }

    pub fn position_of(&self, atom: usize) -> usize {
        self.perm.iter().position(|&a| a == atom).unwrap()
    }
}

pub fn perm_label(perm: &[usize]) -> String {
    perm.iter().map(|a| (a + 1).to_string()).collect::<Vec<_>>().join("")
}

#[derive(Clone, Debug)]
pub struct MultivariateExtension {
    pub base: Query,
    pub components: Vec<Component>,
}

pub const MAX_MV_ATOMS: usize = 5;

/// Permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

pub fn component_query(q: &Query, perm: &[usize]) -> Query {
    let k = perm.len();
    let mut vars: Vec<String> = (1..=k)
        .map(|i| {
            let mut name = format!("Z{i}");
            while q.vars.contains(&name) {
                name.push('_');
            }
            name
        })
        .collect();
    vars.extend(q.vars.iter().cloned());
    let atoms = q
        .atoms
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let pos = perm.iter().position(|&x| x == j).unwrap();
            Atom {
                relation: a.relation.clone(),
                schema: (0..=pos).chain(a.schema.iter().map(|v| v + k)).collect(),
            }
        })
        .collect();
    Query {
        name: format!("{}_{}", q.name, perm_label(perm)),
        vars,
        atoms,
    }
}

pub fn component(q: &Query, perm: &[usize]) -> Result<Component> {
    let cq = component_query(q, perm);
    let z: Vec<Var> = (0..perm.len()).collect();
    let (order, td) = fhtw_prefix_closed(&cq, &z)?;
    let zall: VarSet = (1 << perm.len()) - 1;
    let enum_root = td
        .first_containing(zall)
        .ok_or_else(|| Error::Invalid("no bag holds every Z variable".into()))?;
    Ok(Component {
        perm: perm.to_vec(),
        width: order.width,
        query: cq,
        order,
        td,
        enum_root,
    })
}

pub fn multivariate_extension(q: &Query) -> Result<MultivariateExtension> {
    if q.atoms.len() > MAX_MV_ATOMS {
        return Err(Error::Budget(format!(
            "{} atoms exceed {MAX_MV_ATOMS} for the multivariate extension",
            q.atoms.len()
        )));
    }
    let components = permutations(q.atoms.len())
        .iter()
        .map(|p| component(q, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultivariateExtension {
        base: q.clone(),
        components,
    })
}

pub fn w_hat(q: &Query) -> Result<Rational> {
    let mv = multivariate_extension(q)?;
    Ok(mv.components.iter().map(|c| c.width).max().unwrap_or_else(Rational::zero))
}

/// Z-prefix closure of a bag over `Z1..Zk = 0..k`.
pub fn is_z_prefix_closed(bag: VarSet, k: usize) -> bool {
    let z = bag & ((1u32 << k) - 1);
    z & (z + 1) == 0
}

pub struct ShowBag<'a>(pub &'a Query, pub VarSet);

impl fmt::Display for ShowBag<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.varset_names(self.1).join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::rat;
    use crate::query::parse_query;

    fn q(s: &str) -> Query {
        parse_query(s).unwrap()
    }

    fn names(q: &Query, s: VarSet) -> Vec<String> {
        q.varset_names(s)
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho_star(&q("Q(A,B) :- R(A,B).")).unwrap().0, rat(1, 1));
        let lw4 = q("Q(A,B,C,D) :- R(A,B,C), S(B,C,D), T(C,D,A), U(D,A,B).");
        assert_eq!(rho_star(&lw4).unwrap().0, rat(4, 3));
    }

    #[test]
    fn gyo_and_hierarchy() {
        let qnh = q("Q(A,B) :- R(A), S(A,B), T(B).");
        assert!(is_acyclic(&qnh));
        assert!(!is_hierarchical(&qnh));
        let tri = q("Q(A,B,C) :- R(A,B), S(B,C), T(A,C).");
        assert!(!is_acyclic(&tri));
        let (ok, trace) = gyo(&tri);
        assert!(!ok && trace.is_empty());
        let one = q("Q(A) :- R(A).");
        assert!(is_acyclic(&one) && is_hierarchical(&one));
        let qh = q("Q(A,B,C) :- R(A,B), S(A,C).");
        assert!(is_hierarchical(&qh) && is_acyclic(&qh));
    }

    #[test]
    fn fhtw_examples() {
        let tri = q("Q(A,B,C) :- R(A,B), S(B,C), T(A,C).");
        let (w, td) = fhtw(&tri).unwrap();
        assert_eq!(w, rat(3, 2));
        assert_eq!(td.len(), 1);
        let two = q("Q(A,B,C,D) :- R(A,B), S(B,C), T(A,C), U(B,D), V(C,D).");
        let (w, td) = fhtw(&two).unwrap();
        assert_eq!(w, rat(3, 2));
        assert_eq!(td.len(), 2);
        assert_eq!(names(&two, td.bags[td.root]), vec!["B", "C", "D"]);
        let child = td.children[td.root][0];
        assert_eq!(names(&two, td.bags[child]), vec!["A", "B", "C"]);
        assert!(td.is_valid_for(&two));
        let p3 = q("Q(A,B,C,D) :- R(A,B), S(B,C), T(C,D).");
        let (w, td) = fhtw(&p3).unwrap();
        assert_eq!(w, rat(1, 1));
        assert!(td.is_valid_for(&p3));
    }

    #[test]
    fn component_123_of_triangle() {
        let tri = q("Q(A,B,C) :- R(A,B), S(B,C), T(A,C).");
        let c = component(&tri, &[0, 1, 2]).unwrap();
        assert_eq!(c.query.to_string(), "Q_123(Z1,Z2,Z3,A,B,C) :- R(Z1,A,B), S(Z1,Z2,B,C), T(Z1,Z2,Z3,A,C).");
        assert_eq!(c.width, rat(3, 2));
        assert_eq!(c.td.len(), 2);
        assert_eq!(names(&c.query, c.td.bags[c.td.root]), vec!["Z1", "Z2", "A", "B", "C"]);
        let child = c.td.children[c.td.root][0];
        assert_eq!(names(&c.query, c.td.bags[child]), vec!["Z1", "Z2", "Z3", "A", "C"]);
        assert_eq!(c.enum_root, child);
        let c321 = component(&tri, &[2, 1, 0]).unwrap();
        assert_eq!(
            c321.query.to_string(),
            "Q_321(Z1,Z2,Z3,A,B,C) :- R(Z1,Z2,Z3,A,B), S(Z1,Z2,B,C), T(Z1,A,C)."
        );
    }

    #[test]
    fn single_atom_extensions() {
        let one = q("Q(A) :- R(A).");
        let mv = multivariate_extension(&one).unwrap();
        assert_eq!(mv.components.len(), 1);
        assert_eq!(mv.components[0].query.to_string(), "Q_1(Z1,A) :- R(Z1,A).");
        let te = time_extension(&one);
        assert_eq!(te.extended.to_string(), "Q([Z],A) :- R([Z],A).");
        let p3 = q("Q(A,B,C,D) :- R(A,B), S(B,C), T(C,D).");
        assert_eq!(
            time_extension(&p3).extended.to_string(),
            "Q([Z],A,B,C,D) :- R([Z],A,B), S([Z],B,C), T([Z],C,D)."
        );
    }

    #[test]
    fn prefix_closure() {
        assert!(is_z_prefix_closed(0b0011, 3));
        assert!(is_z_prefix_closed(0b1000, 3));
        assert!(!is_z_prefix_closed(0b0010, 3));
        assert!(!is_z_prefix_closed(0b0101, 3));
    }

    #[test]
    fn figure_four_w_hat() {
        let cases = [
            ("Q(A,B,C) :- R(A,B,C), S(A,B), T(B,C).", rat(3, 2)),
            ("Q(A,B,C,D) :- R(A,B), S(B,C), T(C,D).", rat(3, 2)),
            ("Q(A,B,C) :- R(A,B), S(B,C), T(A,C).", rat(3, 2)),
            ("Q(A,B,C) :- R(A,B), S(B,C), T(A,C), U(C).", rat(5, 3)),
            ("Q(A,B,C,D) :- R(A,B,C,D), S(A,B), T(B,C), U(B,D).", rat(5, 3)),
            ("Q(A,B,C) :- R(A,B,C), S(A), T(B), U(C).", rat(5, 3)),
            ("Q(A,B,C,D) :- R(A,B,C,D), S(A), T(B), U(C), V(D).", rat(7, 4)),
            ("Q(A,B,C) :- R(A), S(A,B), T(B,C), U(C).", rat(2, 1)),
            ("Q(A,B,C,D) :- R(A,B), S(B,C), T(C,D), U(A,D).", rat(2, 1)),
            ("Q(A,B,C) :- R(A,B), S(B,C), T(A,C).", rat(3, 2)),
            ("Q(A,B,C,D) :- R(A,B,C), S(B,C,D), T(C,D,A), U(D,A,B).", rat(3, 2)),
        ];
        for (text, want) in cases {
            let query = q(text);
            let mv = multivariate_extension(&query).unwrap();
            let got = mv.components.iter().map(|c| c.width).max().unwrap();
            assert_eq!(got, want, "{text}");
            for c in &mv.components {
                assert!(c.td.is_valid_for(&c.query));
                assert!(c.td.bags.iter().all(|&b| is_z_prefix_closed(b, c.k())));
                assert_eq!(c.width, fhtw(&c.query).unwrap().0, "{text} {}", c.label());
            }
        }
    }

    #[test]
    fn budget() {
        let wide: Vec<String> = (0..17).map(|i| format!("V{i}")).collect();
        let refs: Vec<&str> = wide.iter().map(|s| s.as_str()).collect();
        let big = Query::from_atoms("Q", &[("R", &refs)]).unwrap();
        assert!(matches!(fhtw(&big), Err(Error::Budget(_))));
        let six = q("Q(A) :- R(A), S(A), T(A), U(A), V(A), W(A).");
        assert!(matches!(multivariate_extension(&six), Err(Error::Budget(_))));
    }
}
