//! Reference maintenance strategies: recompute from scratch, and first-order deltas.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::insert_only::check_arity;
use crate::query::{Query, Sign, Update, UpdateStream};
use crate::value::Tuple;
use crate::wcoj::{delta_join, generic_join, IndexedDatabase, JoinPlan};

fn apply_strict(q: &Query, db: &mut IndexedDatabase, u: &Update) -> Result<()> {
    check_arity(q, u.rel, &u.tuple)?;
    if db.apply(u)? {
        return Ok(());
    }
    let name = q.atoms[u.rel].relation.clone();
    Err(match u.sign {
        Sign::Insert => Error::DuplicateInsert(name),
        Sign::Delete => Error::AbsentDelete(name),
    })
}

/// Keeps the base relations only; every read reruns the join.
#[derive(Clone, Debug)]
pub struct NaiveEngine {
    q: Query,
    plan: JoinPlan,
    db: IndexedDatabase,
}

impl NaiveEngine {
    pub fn new(q: &Query) -> NaiveEngine {
        NaiveEngine {
            q: q.clone(),
            plan: JoinPlan::textual(q),
            db: IndexedDatabase::for_query(q),
        }
    }

    pub fn apply(&mut self, u: &Update) -> Result<()> {
        apply_strict(&self.q, &mut self.db, u)
    }

    pub fn contains(&self, atom: usize, t: &[crate::value::Value]) -> bool {
        self.db.rels[atom].contains(t)
    }

    pub fn result(&self) -> Vec<Tuple> {
        generic_join(&self.q, &self.plan, &self.db).expect("textual plan is always indexed")
    }

    pub fn size(&self) -> usize {
        self.db.size()
    }
}

/// Keeps the result materialized and patches it with the delta query of
/// each update.
#[derive(Clone, Debug)]
pub struct DeltaEngine {
    q: Query,
    db: IndexedDatabase,
    result: HashSet<Tuple>,
}

impl DeltaEngine {
    pub fn new(q: &Query) -> DeltaEngine {
        DeltaEngine {
            q: q.clone(),
            db: IndexedDatabase::for_query(q),
            result: HashSet::new(),
        }
    }

    /// Apply `u` and return its signed effect on the result.
    pub fn apply(&mut self, u: &Update) -> Result<Vec<(Sign, Tuple)>> {
        check_arity(&self.q, u.rel, &u.tuple)?;
        match u.sign {
            Sign::Insert => {
                apply_strict(&self.q, &mut self.db, u)?;
                let new = delta_join(&self.q, &self.db, u.rel, &u.tuple)?;
                let mut out = Vec::with_capacity(new.len());
                for t in new {
                    if self.result.insert(t.clone()) {
                        out.push((Sign::Insert, t));
                    }
                }
                Ok(out)
            }
            Sign::Delete => {
                if !self.db.rels[u.rel].contains(&u.tuple) {
                    return Err(Error::AbsentDelete(self.q.atoms[u.rel].relation.clone()));
                }
                let candidates = delta_join(&self.q, &self.db, u.rel, &u.tuple)?;
                apply_strict(&self.q, &mut self.db, u)?;
                let mut out = Vec::new();
                for t in candidates {
                    // support re-check against the updated database
                    let supported = self.q.atoms.iter().enumerate().all(|(j, a)| {
                        let row: Tuple = a.schema.iter().map(|&v| t[v]).collect();
                        self.db.rels[j].contains(&row)
                    });
                    if !supported && self.result.remove(&t) {
                        out.push((Sign::Delete, t));
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn contains(&self, atom: usize, t: &[crate::value::Value]) -> bool {
        self.db.rels[atom].contains(t)
    }

    pub fn result(&self) -> &HashSet<Tuple> {
        &self.result
    }

    pub fn size(&self) -> usize {
        self.db.size()
    }
}

/// Full result after every update, by recomputation.
pub fn naive_maintain(q: &Query, stream: &UpdateStream) -> Result<Vec<BTreeSet<Tuple>>> {
    let mut e = NaiveEngine::new(q);
    stream
        .updates
        .iter()
        .map(|u| {
            e.apply(u)?;
            Ok(e.result().into_iter().collect())
        })
        .collect()
}

/// Full result and signed delta after every update, by delta queries.
pub fn delta_maintain(q: &Query, stream: &UpdateStream) -> Result<Vec<(BTreeSet<Tuple>, Vec<(Sign, Tuple)>)>> {
    let mut e = DeltaEngine::new(q);
    stream
        .updates
        .iter()
        .map(|u| {
            let mut d = e.apply(u)?;
            d.sort();
            Ok((e.result().iter().cloned().collect(), d))
        })
        .collect()
}
