//! Named queries and the running update stream used by tests, the CLI and benchmarks.

use crate::query::{parse_query, Query, Update, UpdateStream};
use crate::value::tuple_of;

pub const TRIANGLE: &str = "Q(A,B,C) :- R(A,B), S(B,C), T(A,C).";
pub const THREE_PATH: &str = "Q(A,B,C,D) :- R(A,B), S(B,C), T(C,D).";
pub const LOOMIS_WHITNEY_4: &str = "Q(A,B,C,D) :- R(A,B,C), S(B,C,D), T(C,D,A), U(D,A,B).";
pub const TWO_TRIANGLES: &str = "Q(A,B,C,D) :- R(A,B), S(B,C), T(A,C), U(B,D), V(C,D).";
/// A hierarchical query: the atom sets of any two variables are nested or disjoint.
pub const HIERARCHICAL: &str = "Q(A,B,C) :- R(A,B), S(A,C).";
/// Vector-matrix-vector shape: `R` and `T` hold vectors, `S` the matrix.
pub const NON_HIERARCHICAL: &str = "Q(A,B) :- R(A), S(A,B), T(B).";

/// Short names accepted by the CLI and used in reports.
pub fn named(name: &str) -> Option<Query> {
    let (text, label) = match name {
        "triangle" | "tri" => (TRIANGLE, "triangle"),
        "3path" | "path" => (THREE_PATH, "3path"),
        "lw4" => (LOOMIS_WHITNEY_4, "lw4"),
        "two-triangles" | "2tri" => (TWO_TRIANGLES, "two-triangles"),
        "hier" | "hierarchical" => (HIERARCHICAL, "hier"),
        "oumv" | "nh" => (NON_HIERARCHICAL, "oumv"),
        _ => return None,
    };
    let mut q = parse_query(text).ok()?;
    q.name = label.to_string();
    Some(q)
}

/// Eight updates on the triangle query: four inserts, then four deletes.
pub fn triangle_stream() -> UpdateStream {
    let u = |ins: bool, rel: usize, a: &str, b: &str| {
        let t = tuple_of(&[a, b]);
        if ins {
            Update::insert(rel, t)
        } else {
            Update::delete(rel, t)
        }
    };
    UpdateStream {
        updates: vec![
            u(true, 0, "a1", "b1"),
            u(true, 1, "b1", "c1"),
            u(true, 2, "a1", "c1"),
            u(true, 1, "b2", "c1"),
            u(false, 1, "b1", "c1"),
            u(false, 1, "b2", "c1"),
            u(false, 2, "a1", "c1"),
            u(false, 0, "a1", "b1"),
        ],
    }
}
