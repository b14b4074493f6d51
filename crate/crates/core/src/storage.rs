//! Relations indexed by hash tries, one trie per attribute order.
//!
//! Every trie node stores how many distinct tuples extend its prefix. The
//! first trie also keeps a multiplicity per tuple so that a relation can be
//! used either as a set (`insert`/`delete`) or as a counted bag of support
//! (`add`/`sub`), where only 0↔1 transitions change the visible tuple set.

use indexmap::IndexMap;
use rustc_hash::FxBuildHasher;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::value::{Tuple, Value};

/// Child map of a trie node: a short vector with linear search, promoted to
/// a hash map once it grows. Both keep insertion order under `swap_remove`.
#[derive(Clone, Debug)]
enum Kids {
    Few(SmallVec<[(Value, u32); 4]>),
    Many(IndexMap<Value, u32, FxBuildHasher>),
}

const FEW_MAX: usize = 8;

impl Default for Kids {
    fn default() -> Kids {
        Kids::Few(SmallVec::new())
    }
}

impl Kids {
    fn get(&self, v: &Value) -> Option<&u32> {
        match self {
            Kids::Few(xs) => xs.iter().find(|(k, _)| k == v).map(|(_, c)| c),
            Kids::Many(m) => m.get(v),
        }
    }

    fn get_mut(&mut self, v: &Value) -> Option<&mut u32> {
        match self {
            Kids::Few(xs) => xs.iter_mut().find(|(k, _)| k == v).map(|(_, c)| c),
            Kids::Many(m) => m.get_mut(v),
        }
    }

    fn insert(&mut self, v: Value, c: u32) -> Option<u32> {
        if let Some(old) = self.get_mut(&v) {
            return Some(std::mem::replace(old, c));
        }
        match self {
            Kids::Few(xs) if xs.len() < FEW_MAX => xs.push((v, c)),
            Kids::Few(xs) => {
                let mut m: IndexMap<Value, u32, FxBuildHasher> = xs.drain(..).collect();
                m.insert(v, c);
                *self = Kids::Many(m);
            }
            Kids::Many(m) => {
                m.insert(v, c);
            }
        }
        None
    }

    fn swap_remove(&mut self, v: &Value) -> Option<u32> {
        match self {
            Kids::Few(xs) => {
                let i = xs.iter().position(|(k, _)| k == v)?;
                Some(xs.swap_remove(i).1)
            }
            Kids::Many(m) => m.swap_remove(v),
        }
    }

    fn clear(&mut self) {
        *self = Kids::default();
    }

    fn len(&self) -> usize {
        match self {
            Kids::Few(xs) => xs.len(),
            Kids::Many(m) => m.len(),
        }
    }

    fn get_index(&self, i: usize) -> Option<(&Value, &u32)> {
        match self {
            Kids::Few(xs) => xs.get(i).map(|(k, c)| (k, c)),
            Kids::Many(m) => m.get_index(i),
        }
    }

    fn iter(&self) -> impl Iterator<Item = (&Value, &u32)> + '_ {
        (0..self.len()).map(move |i| self.get_index(i).unwrap())
    }

    fn keys(&self) -> impl Iterator<Item = &Value> + '_ {
        self.iter().map(|(k, _)| k)
    }
}

#[derive(Clone, Debug, Default)]
struct TNode {
    count: u32,
    kids: Kids,
}

#[derive(Clone, Debug)]
struct Trie {
    nodes: Vec<TNode>,
    free: Vec<u32>,
}

pub const ROOT: u32 = 0;

type Key = SmallVec<[Value; 8]>;

impl Trie {
    fn new() -> Trie {
        Trie {
            nodes: vec![TNode::default()],
            free: Vec::new(),
        }
    }

    fn alloc(&mut self) -> u32 {
        if let Some(id) = self.free.pop() {
            id
        } else {
            self.nodes.push(TNode::default());
            (self.nodes.len() - 1) as u32
        }
    }

    /// Leaf payload of `key`, if present.
    fn find(&self, key: &[Value]) -> Option<u32> {
        let mut node = ROOT;
        let last = key.len() - 1;
        for v in &key[..last] {
            node = *self.nodes[node as usize].kids.get(v)?;
        }
        self.nodes[node as usize].kids.get(&key[last]).copied()
    }

    fn leaf_mut(&mut self, key: &[Value]) -> Option<&mut u32> {
        let mut node = ROOT;
        let last = key.len() - 1;
        for v in &key[..last] {
            node = *self.nodes[node as usize].kids.get(v)?;
        }
        self.nodes[node as usize].kids.get_mut(&key[last])
    }

    /// Insert an absent key.
    fn insert(&mut self, key: &[Value], payload: u32) {
        let mut node = ROOT;
        self.nodes[0].count += 1;
        let last = key.len() - 1;
        for v in &key[..last] {
            let next = match self.nodes[node as usize].kids.get(v) {
                Some(&c) => c,
                None => {
                    let c = self.alloc();
                    self.nodes[node as usize].kids.insert(*v, c);
                    c
                }
            };
            self.nodes[next as usize].count += 1;
            node = next;
        }
        let prev = self.nodes[node as usize].kids.insert(key[last], payload);
        debug_assert!(prev.is_none());
    }

    /// Remove a present key, pruning emptied nodes.
    fn remove(&mut self, key: &[Value]) {
        let mut path: SmallVec<[u32; 8]> = SmallVec::new();
        let mut node = ROOT;
        path.push(node);
        let last = key.len() - 1;
        for v in &key[..last] {
            node = *self.nodes[node as usize].kids.get(v).unwrap();
            path.push(node);
        }
        let removed = self.nodes[node as usize].kids.swap_remove(&key[last]);
        debug_assert!(removed.is_some());
        for d in (0..path.len()).rev() {
            let id = path[d] as usize;
            self.nodes[id].count -= 1;
            if d > 0 && self.nodes[id].count == 0 {
                self.nodes[path[d - 1] as usize].kids.swap_remove(&key[d - 1]);
                self.nodes[id].kids.clear();
                self.free.push(path[d]);
            }
        }
    }
}

/// A relation over `arity` columns with a trie per requested column order.
#[derive(Clone, Debug)]
pub struct IndexedRelation {
    arity: usize,
    orders: Vec<Vec<usize>>,
    tries: Vec<Trie>,
    nullary: u32,
}

impl IndexedRelation {
    pub fn new(arity: usize, orders: &[Vec<usize>]) -> Result<IndexedRelation> {
        let mut uniq: Vec<Vec<usize>> = Vec::new();
        for o in orders {
            let mut s = o.clone();
            s.sort_unstable();
            if s != (0..arity).collect::<Vec<_>>() {
                return Err(Error::Invalid(format!("{o:?} is not a permutation of {arity} columns")));
            }
            if !uniq.contains(o) {
                uniq.push(o.clone());
            }
        }
        if uniq.is_empty() {
            uniq.push((0..arity).collect());
        }
        Ok(IndexedRelation {
            arity,
            tries: uniq.iter().map(|_| Trie::new()).collect(),
            orders: uniq,
            nullary: 0,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn orders(&self) -> &[Vec<usize>] {
        &self.orders
    }

    pub fn order_id(&self, perm: &[usize]) -> Option<usize> {
        self.orders.iter().position(|o| o == perm)
    }

    pub fn len(&self) -> usize {
        if self.arity == 0 {
            usize::from(self.nullary > 0)
        } else {
            self.tries[0].nodes[0].count as usize
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(&self, order: usize, t: &[Value]) -> Key {
        self.orders[order].iter().map(|&c| t[c]).collect()
    }

    fn check(&self, t: &[Value]) -> Result<()> {
        if t.len() != self.arity {
            return Err(Error::Arity {
                relation: "indexed relation".into(),
                expected: self.arity,
                got: t.len(),
            });
        }
        Ok(())
    }

    pub fn multiplicity(&self, t: &[Value]) -> u32 {
        if self.arity == 0 {
            return self.nullary;
        }
        self.tries[0].find(&self.key(0, t)).unwrap_or(0)
    }

    pub fn contains(&self, t: &[Value]) -> bool {
        self.multiplicity(t) > 0
    }

    /// Set insert; `true` if the tuple was absent.
    pub fn insert(&mut self, t: &[Value]) -> Result<bool> {
        self.check(t)?;
        if self.contains(t) {
            return Ok(false);
        }
        self.add(t);
        Ok(true)
    }

    /// Set delete; `true` if the tuple was present.
    pub fn delete(&mut self, t: &[Value]) -> Result<bool> {
        self.check(t)?;
        if !self.contains(t) {
            return Ok(false);
        }
        self.remove_all(t);
        Ok(true)
    }

    /// Increment the multiplicity; `true` if the tuple became present.
    pub fn add(&mut self, t: &[Value]) -> bool {
        debug_assert_eq!(t.len(), self.arity);
        if self.arity == 0 {
            self.nullary += 1;
            return self.nullary == 1;
        }
        let k0 = self.key(0, t);
        if let Some(m) = self.tries[0].leaf_mut(&k0) {
            *m += 1;
            return false;
        }
        self.tries[0].insert(&k0, 1);
        for o in 1..self.tries.len() {
            let k = self.key(o, t);
            self.tries[o].insert(&k, 0);
        }
        true
    }

    /// Decrement the multiplicity; `true` if the tuple became absent.
    /// The tuple must be present.
    pub fn sub(&mut self, t: &[Value]) -> bool {
        debug_assert_eq!(t.len(), self.arity);
        if self.arity == 0 {
            assert!(self.nullary > 0, "sub of absent nullary tuple");
            self.nullary -= 1;
            return self.nullary == 0;
        }
        let k0 = self.key(0, t);
        let m = self.tries[0].leaf_mut(&k0).expect("sub of absent tuple");
        if *m > 1 {
            *m -= 1;
            return false;
        }
        self.remove_all(t);
        true
    }

    fn remove_all(&mut self, t: &[Value]) {
        if self.arity == 0 {
            self.nullary = 0;
            return;
        }
        for o in 0..self.tries.len() {
            let k = self.key(o, t);
            self.tries[o].remove(&k);
        }
    }

    /// Number of tuples whose first `prefix.len()` attributes in `order` equal `prefix`.
    pub fn select_count(&self, order: usize, prefix: &[Value]) -> usize {
        if self.arity == 0 {
            return self.len();
        }
        if prefix.len() == self.arity {
            return usize::from(self.tries[order].find(prefix).is_some());
        }
        match self.node_at(order, prefix) {
            Some(n) => self.tries[order].nodes[n as usize].count as usize,
            None => 0,
        }
    }

    /// Trie node reached by a proper prefix.
    pub fn node_at(&self, order: usize, prefix: &[Value]) -> Option<u32> {
        debug_assert!(prefix.len() < self.arity.max(1));
        let trie = &self.tries[order];
        let mut node = ROOT;
        for v in prefix {
            node = *trie.nodes[node as usize].kids.get(v)?;
        }
        Some(node)
    }

    /// Child of `node` (at depth < arity) labelled `v`; below the last
    /// level the payload is returned instead of a node id.
    #[inline]
    pub fn child(&self, order: usize, node: u32, v: &Value) -> Option<u32> {
        self.tries[order].nodes[node as usize].kids.get(v).copied()
    }

    #[inline]
    pub fn num_children(&self, order: usize, node: u32) -> usize {
        self.tries[order].nodes[node as usize].kids.len()
    }

    #[inline]
    pub fn child_at(&self, order: usize, node: u32, i: usize) -> (Value, u32) {
        let (v, c) = self.tries[order].nodes[node as usize].kids.get_index(i).unwrap();
        (*v, *c)
    }

    /// Distinct next-attribute values under `prefix`.
    pub fn iter_children<'a>(&'a self, order: usize, prefix: &[Value]) -> impl Iterator<Item = Value> + 'a {
        let node = if prefix.len() < self.arity {
            self.node_at(order, prefix)
        } else {
            None
        };
        let kids = node.map(|n| &self.tries[order].nodes[n as usize].kids);
        kids.into_iter().flat_map(|k| k.keys().copied())
    }

    /// Every tuple (in column order) whose `order`-prefix equals `prefix`.
    pub fn for_each_with_prefix(&self, order: usize, prefix: &[Value], mut f: impl FnMut(&[Value])) {
        if self.arity == 0 {
            if self.nullary > 0 {
                f(&[]);
            }
            return;
        }
        let perm = &self.orders[order];
        let mut row: Tuple = smallvec::smallvec![Value::bits(crate::segtree::Bitstring::EMPTY); self.arity];
        for (d, v) in prefix.iter().enumerate() {
            row[perm[d]] = *v;
        }
        if prefix.len() == self.arity {
            if self.tries[order].find(prefix).is_some() {
                f(&row);
            }
            return;
        }
        let Some(start) = self.node_at(order, prefix) else {
            return;
        };
        self.walk(order, start, prefix.len(), &mut row, &mut f);
    }

    fn walk(&self, order: usize, node: u32, depth: usize, row: &mut Tuple, f: &mut impl FnMut(&[Value])) {
        let col = self.orders[order][depth];
        let kids = &self.tries[order].nodes[node as usize].kids;
        if depth + 1 == self.arity {
            for v in kids.keys() {
                row[col] = *v;
                f(row);
            }
        } else {
            for (v, &c) in kids.iter() {
                row[col] = *v;
                self.walk(order, c, depth + 1, row, f);
            }
        }
    }

    pub fn tuples(&self) -> Vec<Tuple> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each_with_prefix(0, &[], |t| out.push(t.iter().copied().collect()));
        out
    }

    /// Tuples reconstructed from the trie of `order` (coherence checks).
    pub fn tuples_via(&self, order: usize) -> Vec<Tuple> {
        let mut out = Vec::new();
        self.for_each_with_prefix(order, &[], |t| out.push(t.iter().copied().collect()));
        out
    }

    /// Approximate heap footprint in trie nodes across orders.
    pub fn node_count(&self) -> usize {
        self.tries.iter().map(|t| t.nodes.len() - t.free.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::tuple_of;
    use std::collections::HashSet;

    fn rel2() -> IndexedRelation {
        IndexedRelation::new(2, &[vec![0, 1], vec![1, 0]]).unwrap()
    }

    #[test]
    fn set_semantics() {
        let mut r = rel2();
        assert_eq!(r.len(), 0);
        assert!(r.insert(&tuple_of(&["a1", "b1"])).unwrap());
        assert!(!r.insert(&tuple_of(&["a1", "b1"])).unwrap());
        assert!(!r.delete(&tuple_of(&["a2", "b1"])).unwrap());
        assert!(r.insert(&tuple_of(&["a1"])).is_err());
        assert!(IndexedRelation::new(2, &[vec![0, 0]]).is_err());
    }

    #[test]
    fn table_one_counts() {
        let mut s = rel2();
        let b1 = Value::constant("b1");
        s.insert(&tuple_of(&["b1", "c1"])).unwrap();
        assert_eq!(s.select_count(0, &[b1]), 1);
        s.insert(&tuple_of(&["b2", "c1"])).unwrap();
        assert_eq!(s.len(), 2);
        let bs: HashSet<Value> = s.iter_children(0, &[]).collect();
        assert_eq!(bs, [b1, Value::constant("b2")].into_iter().collect());
        assert_eq!(s.iter_children(0, &[Value::constant("zz")]).count(), 0);
        assert_eq!(s.select_count(1, &[Value::constant("c1")]), 2);
        let empty = rel2();
        assert_eq!(empty.select_count(0, &[]), 0);
    }

    #[test]
    fn multiplicities() {
        let mut r = IndexedRelation::new(1, &[vec![0]]).unwrap();
        let t = tuple_of(&["x"]);
        assert!(r.add(&t));
        assert!(!r.add(&t));
        assert!(!r.sub(&t));
        assert!(r.contains(&t));
        assert!(r.sub(&t));
        assert!(!r.contains(&t));
        let mut z = IndexedRelation::new(0, &[]).unwrap();
        assert!(z.add(&[]));
        assert_eq!(z.len(), 1);
        assert!(z.sub(&[]));
        assert!(z.is_empty());
    }

    #[test]
    fn coherence_under_random_ops() {
        let mut r = IndexedRelation::new(3, &[vec![0, 1, 2], vec![2, 0, 1], vec![1, 2, 0]]).unwrap();
        let mut oracle: HashSet<Tuple> = HashSet::new();
        let mut s = 7u64;
        let vals: Vec<Value> = (0..4).map(|i| Value::constant(&format!("v{i}"))).collect();
        for _ in 0..10_000 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let t: Tuple = (0..3).map(|i| vals[((s >> (20 + 3 * i)) % 4) as usize]).collect();
            if (s >> 60) % 2 == 0 {
                assert_eq!(r.insert(&t).unwrap(), oracle.insert(t.clone()));
            } else {
                assert_eq!(r.delete(&t).unwrap(), oracle.remove(&t));
            }
        }
        assert_eq!(r.len(), oracle.len());
        for o in 0..3 {
            let got: HashSet<Tuple> = r.tuples_via(o).into_iter().collect();
            assert_eq!(got, oracle);
        }
        // prefix counts against a scan
        for a in &vals {
            for b in &vals {
                let brute = oracle.iter().filter(|t| t[2] == *a && t[0] == *b).count();
                assert_eq!(r.select_count(1, &[*a, *b]), brute);
            }
        }
    }
}
