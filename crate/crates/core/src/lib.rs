//! Incremental maintenance of full conjunctive queries under single-tuple
//! inserts and deletes, with constant-delay enumeration of results and deltas.

pub mod baselines;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod insert_delete;
pub mod insert_only;
pub mod lp;
pub mod network;
pub mod query;
pub mod reduction;
pub mod segtree;
pub mod storage;
pub mod value;
pub mod wcoj;
pub mod width;

pub use error::{Error, Result};
