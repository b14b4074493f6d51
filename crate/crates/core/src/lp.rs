//! Exact fractional edge covers by rational simplex.
//!
//! The packing LP `max Σ y_v  s.t.  Σ_{v∈e} y_v ≤ 1, y ≥ 0` is solved from the
//! slack basis with Bland's rule; the cover weights are read off the reduced
//! costs of the slack columns and then checked exactly.

use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::query::VarSet;

pub type Rational = Ratio<i128>;

pub const MAX_LP_VARS: usize = 16;
pub const MAX_LP_EDGES: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cover {
    /// One weight per input edge.
    pub weights: Vec<Rational>,
    pub objective: Rational,
}

pub fn rat(n: i128, d: i128) -> Rational {
    Ratio::new(n, d)
}

/// Minimum fractional cover of the variables in `scope` by `edges`.
pub fn min_fractional_cover(edges: &[VarSet], scope: VarSet) -> Result<Cover> {
    let vars: Vec<usize> = (0..32).filter(|v| scope & (1 << v) != 0).collect();
    let rows: Vec<usize> = (0..edges.len()).filter(|&e| edges[e] & scope != 0).collect();
    if vars.len() > MAX_LP_VARS {
        return Err(Error::Budget(format!("{} variables exceed {MAX_LP_VARS}", vars.len())));
    }
    if rows.len() > MAX_LP_EDGES {
        return Err(Error::Budget(format!("{} atoms exceed {MAX_LP_EDGES}", rows.len())));
    }
    let mut weights = vec![Rational::zero(); edges.len()];
    if vars.is_empty() {
        return Ok(Cover {
            weights,
            objective: Rational::zero(),
        });
    }
    for &v in &vars {
        if !rows.iter().any(|&e| edges[e] & (1 << v) != 0) {
            return Err(Error::Invalid(format!("variable {v} is not covered by any atom")));
        }
    }
    let m = vars.len();
    let n = rows.len();
    let cols = m + n;
    // tableau rows: [y_0..y_{m-1} | s_0..s_{n-1} | rhs]
    let mut t: Vec<Vec<Rational>> = rows
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let mut r = vec![Rational::zero(); cols + 1];
            for (j, &v) in vars.iter().enumerate() {
                if edges[e] & (1 << v) != 0 {
                    r[j] = Rational::one();
                }
            }
            r[m + i] = Rational::one();
            r[cols] = Rational::one();
            r
        })
        .collect();
    // reduced costs c_j - z_j and current objective value
    let mut red: Vec<Rational> = (0..cols)
        .map(|j| if j < m { Rational::one() } else { Rational::zero() })
        .collect();
    let mut obj = Rational::zero();
    let mut basis: Vec<usize> = (m..cols).collect();

    loop {
        let Some(enter) = (0..cols).find(|&j| red[j] > Rational::zero()) else {
            break;
        };
        let mut leave: Option<usize> = None;
        for i in 0..n {
            if t[i][enter] > Rational::zero() {
                let ratio = t[i][cols] / t[i][enter];
                leave = match leave {
                    None => Some(i),
                    Some(l) => {
                        let lr = t[l][cols] / t[l][enter];
                        if ratio < lr || (ratio == lr && basis[i] < basis[l]) {
                            Some(i)
                        } else {
                            Some(l)
                        }
                    }
                };
            }
        }
        let Some(l) = leave else {
            return Err(Error::Invalid("unbounded packing LP".into()));
        };
        let piv = t[l][enter];
        for x in t[l].iter_mut() {
            *x /= piv;
        }
        let prow = t[l].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != l && !row[enter].is_zero() {
                let f = row[enter];
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x -= f * p;
                }
            }
        }
        let f = red[enter];
        for (x, p) in red.iter_mut().zip(&prow[..cols]) {
            *x -= f * p;
        }
        obj += f * prow[cols];
        basis[l] = enter;
    }

    for (i, &e) in rows.iter().enumerate() {
        weights[e] = -red[m + i];
    }
    // exact certificate: primal feasibility and equal objectives
    let total: Rational = weights.iter().copied().sum();
    for &v in &vars {
        let s: Rational = (0..edges.len())
            .filter(|&e| edges[e] & (1 << v) != 0)
            .map(|e| weights[e])
            .sum();
        if s < Rational::one() {
            return Err(Error::Invalid("cover certificate failed".into()));
        }
    }
    if total != obj || weights.iter().any(|w| *w < Rational::zero() || *w > Rational::one()) {
        return Err(Error::Invalid("cover certificate failed".into()));
    }
    Ok(Cover {
        weights,
        objective: obj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Vertex enumeration oracle: try every square subsystem of tight
    /// constraints (cover rows and λ_e = 0 rows) in exact arithmetic.
    fn brute_cover(edges: &[VarSet], scope: VarSet) -> Rational {
        let vars: Vec<usize> = (0..32).filter(|v| scope & (1 << v) != 0).collect();
        let n = edges.len();
        let mut rows: Vec<(Vec<Rational>, Rational)> = Vec::new();
        for &v in &vars {
            rows.push((
                (0..n)
                    .map(|e| if edges[e] & (1 << v) != 0 { Rational::one() } else { Rational::zero() })
                    .collect(),
                Rational::one(),
            ));
        }
        for e in 0..n {
            let mut r = vec![Rational::zero(); n];
            r[e] = Rational::one();
            rows.push((r, Rational::zero()));
        }
        let mut best: Option<Rational> = None;
        let total = rows.len();
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let sel: Vec<&(Vec<Rational>, Rational)> =
                (0..total).filter(|i| mask & (1 << i) != 0).map(|i| &rows[i]).collect();
            if let Some(x) = solve(&sel, n) {
                let feasible = x.iter().all(|v| *v >= Rational::zero())
                    && vars.iter().all(|&v| {
                        (0..n)
                            .filter(|&e| edges[e] & (1 << v) != 0)
                            .map(|e| x[e])
                            .sum::<Rational>()
                            >= Rational::one()
                    });
                if feasible {
                    let obj: Rational = x.iter().copied().sum();
                    best = Some(best.map_or(obj, |b| b.min(obj)));
                }
            }
        }
        best.unwrap()
    }

    fn solve(sel: &[&(Vec<Rational>, Rational)], n: usize) -> Option<Vec<Rational>> {
        let mut a: Vec<Vec<Rational>> = sel
            .iter()
            .map(|(r, b)| {
                let mut row = r.clone();
                row.push(*b);
                row
            })
            .collect();
        for c in 0..n {
            let p = (c..n).find(|&i| !a[i][c].is_zero())?;
            a.swap(c, p);
            let pv = a[c][c];
            for x in a[c].iter_mut() {
                *x /= pv;
            }
            let pr = a[c].clone();
            for (i, row) in a.iter_mut().enumerate() {
                if i != c && !row[c].is_zero() {
                    let f = row[c];
                    for (x, p) in row.iter_mut().zip(&pr) {
                        *x -= f * p;
                    }
                }
            }
        }
        Some(a.iter().map(|r| r[n]).collect())
    }

    #[test]
    fn triangle_and_single_atom() {
        let tri = [0b011, 0b110, 0b101];
        let c = min_fractional_cover(&tri, 0b111).unwrap();
        assert_eq!(c.objective, rat(3, 2));
        assert!(c.weights.iter().all(|w| *w == rat(1, 2)));
        let one = min_fractional_cover(&[0b11], 0b11).unwrap();
        assert_eq!(one.objective, rat(1, 1));
        assert_eq!(min_fractional_cover(&[0b11], 0).unwrap().objective, rat(0, 1));
    }

    #[test]
    fn loomis_whitney_four() {
        // R(A,B,C) S(B,C,D) T(C,D,A) U(D,A,B)
        let lw4 = [0b0111, 0b1110, 0b1101, 0b1011];
        let c = min_fractional_cover(&lw4, 0b1111).unwrap();
        assert_eq!(c.objective, brute_cover(&lw4, 0b1111));
        assert_eq!(c.objective, rat(4, 3));
    }

    #[test]
    fn matches_vertex_enumeration_on_small_hypergraphs() {
        let mut seed = 12345u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for _ in 0..300 {
            let nv = 1 + (next() % 5) as usize;
            let ne = 1 + (next() % 4) as usize;
            let full = (1u32 << nv) - 1;
            let mut edges: Vec<VarSet> = (0..ne).map(|_| (next() as u32 & full).max(1)).collect();
            let covered = edges.iter().fold(0, |a, e| a | e);
            if covered != full {
                edges.push(full & !covered);
            }
            let c = min_fractional_cover(&edges, full).unwrap();
            assert_eq!(c.objective, brute_cover(&edges, full), "{edges:?}");
        }
    }

    #[test]
    fn budget_and_uncovered() {
        assert!(matches!(min_fractional_cover(&[0b01], 0b11), Err(Error::Invalid(_))));
        let wide = [(1u32 << 17) - 1];
        assert!(matches!(min_fractional_cover(&wide, (1 << 17) - 1), Err(Error::Budget(_))));
    }
}
