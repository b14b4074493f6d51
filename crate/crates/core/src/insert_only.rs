//! Maintenance under insert-only streams over an optimal tree decomposition.

use crate::error::{Error, Result};
use crate::network::{Enumerator, Network, NetworkConfig, ViewDef};
use crate::query::{Query, Sign, Update};
use crate::value::{Tuple, Value};
use crate::width::{fhtw, TreeDecomposition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Full-result enumeration only.
    Full,
    /// Also enumerate the change caused by the latest update.
    Delta,
}

/// Identifies one processed update; valid until the next one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaHandle {
    pub tau: u64,
    pub sign: Sign,
    pub atom: usize,
    pub tuple: Tuple,
    /// False when the update left the database unchanged.
    pub changed: bool,
}

pub(crate) fn check_arity(q: &Query, atom: usize, t: &[Value]) -> Result<()> {
    let a = q
        .atoms
        .get(atom)
        .ok_or_else(|| Error::UnknownRelation(format!("#{atom}")))?;
    if a.schema.len() != t.len() {
        return Err(Error::Arity {
            relation: a.relation.clone(),
            expected: a.schema.len(),
            got: t.len(),
        });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct InsertOnlyEngine {
    mode: Mode,
    net: Network,
    tau: u64,
    size: usize,
}

impl InsertOnlyEngine {
    pub fn new(q: &Query, mode: Mode) -> Result<InsertOnlyEngine> {
        let (_, td) = fhtw(q)?;
        Ok(InsertOnlyEngine::with_td(q, &td, mode))
    }

    pub fn with_td(q: &Query, td: &TreeDecomposition, mode: Mode) -> InsertOnlyEngine {
        let cfg = NetworkConfig {
            deletes: false,
            topdown: mode == Mode::Delta,
            root_prefix: Vec::new(),
        };
        InsertOnlyEngine {
            mode,
            net: Network::new(q, td, cfg),
            tau: 0,
            size: 0,
        }
    }

    pub fn query(&self) -> &Query {
        self.net.query()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn timestamp(&self) -> u64 {
        self.tau
    }

    /// Number of distinct base tuples.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn plan(&self) -> Vec<ViewDef> {
        self.net.plan()
    }

    pub fn plan_summary(&self) -> String {
        self.net.plan_summary()
    }

    /// Insert `tuple` (atom schema order) into atom `rel`. A tuple that is
    /// already present is a no-op whose delta is empty.
    pub fn insert(&mut self, rel: usize, tuple: Tuple) -> Result<DeltaHandle> {
        check_arity(self.net.query(), rel, &tuple)?;
        self.tau += 1;
        let changed = !self.net.contains(rel, &tuple);
        if changed {
            self.net.add(rel, &tuple);
            self.size += 1;
        }
        Ok(DeltaHandle {
            tau: self.tau,
            sign: Sign::Insert,
            atom: rel,
            tuple,
            changed,
        })
    }

    pub fn apply(&mut self, u: &Update) -> Result<DeltaHandle> {
        match u.sign {
            Sign::Insert => self.insert(u.rel, u.tuple.clone()),
            Sign::Delete => Err(Error::Unsupported("deletes on the insert-only engine".into())),
        }
    }

    pub fn enumerate_full(&self) -> Enumerator<'_> {
        self.net.enumerate(&[])
    }

    /// Output tuples added by the update behind `h`.
    pub fn enumerate_delta(&self, h: &DeltaHandle) -> Result<impl Iterator<Item = Tuple> + '_> {
        if self.mode != Mode::Delta {
            return Err(Error::Unsupported("delta enumeration needs delta mode".into()));
        }
        if h.tau != self.tau {
            return Err(Error::StaleHandle(h.tau, self.tau));
        }
        let it = h.changed.then(|| self.net.enumerate_with(h.atom, &h.tuple));
        Ok(it.into_iter().flatten())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;
    use crate::value::tuple_of;
    use std::collections::BTreeSet;

    fn tri() -> Query {
        parse_query("Q(A,B,C) :- R(A,B), S(B,C), T(A,C).").unwrap()
    }

    #[test]
    fn table_one_prefix() {
        let mut e = InsertOnlyEngine::new(&tri(), Mode::Delta).unwrap();
        assert_eq!(e.enumerate_full().count(), 0);
        let h = e.insert(0, tuple_of(&["a1", "b1"])).unwrap();
        assert_eq!(e.enumerate_delta(&h).unwrap().count(), 0);
        e.insert(1, tuple_of(&["b1", "c1"])).unwrap();
        let h = e.insert(2, tuple_of(&["a1", "c1"])).unwrap();
        let d: Vec<Tuple> = e.enumerate_delta(&h).unwrap().collect();
        assert_eq!(d, vec![tuple_of(&["a1", "b1", "c1"])]);
        let h = e.insert(1, tuple_of(&["b2", "c1"])).unwrap();
        assert_eq!(e.enumerate_delta(&h).unwrap().count(), 0);
        let full: Vec<Tuple> = e.enumerate_full().collect();
        assert_eq!(full, vec![tuple_of(&["a1", "b1", "c1"])]);
        let dup = e.insert(0, tuple_of(&["a1", "b1"])).unwrap();
        assert!(!dup.changed);
        assert_eq!(e.enumerate_delta(&dup).unwrap().count(), 0);
        assert!(matches!(e.enumerate_delta(&h), Err(Error::StaleHandle(..))));
        assert!(matches!(
            e.apply(&Update::delete(0, tuple_of(&["a1", "b1"]))),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(e.insert(0, tuple_of(&["a1"])), Err(Error::Arity { .. })));
    }

    #[test]
    fn two_triangles_left_only() {
        let q = parse_query("Q(A,B,C,D) :- R(A,B), S(B,C), T(A,C), U(B,D), V(C,D).").unwrap();
        let mut e = InsertOnlyEngine::new(&q, Mode::Full).unwrap();
        e.insert(0, tuple_of(&["a", "b"])).unwrap();
        e.insert(1, tuple_of(&["b", "c"])).unwrap();
        e.insert(2, tuple_of(&["a", "c"])).unwrap();
        let net = e.network();
        let sizes: BTreeSet<usize> = (0..net.num_nodes()).map(|t| net.view(t).len()).collect();
        assert_eq!(sizes, BTreeSet::from([0, 1]));
        assert_eq!(e.enumerate_full().count(), 0);
        let h = e.insert(3, tuple_of(&["b", "d"])).unwrap();
        assert!(matches!(e.enumerate_delta(&h), Err(Error::Unsupported(_))));
        e.insert(4, tuple_of(&["c", "d"])).unwrap();
        let full: Vec<Tuple> = e.enumerate_full().collect();
        assert_eq!(full, vec![tuple_of(&["a", "b", "c", "d"])]);
    }

    #[test]
    fn irrelevant_leaf_insert_stays_local() {
        let q = parse_query("Q(A,B,C,D) :- R(A,B), S(B,C), T(C,D).").unwrap();
        let mut e = InsertOnlyEngine::new(&q, Mode::Delta).unwrap();
        let h = e.insert(2, tuple_of(&["c", "d"])).unwrap();
        assert_eq!(e.enumerate_delta(&h).unwrap().count(), 0);
        let net = e.network();
        let nonempty = (0..net.num_nodes()).filter(|&t| !net.view(t).is_empty()).count();
        assert!(nonempty <= 1);
    }
}
