//! Identified set of normalised payoffs.
//!
//! `w` belongs to the set iff `G(w) = 0` and `w` is optimal against the coupling, i.e.
//! `w_a + eps^s_a >= w_b + eps^s_b` whenever `pi_as > 0`. These are difference
//! constraints `w_b - w_a <= A(a, b)` with `A(a, b) = min_{s: pi_as > 0} eps^s_a - eps^s_b`,
//! so the extreme payoffs follow from the shortest-path closure `D` of `A`:
//!
//! ```text
//! upper_y =  mean_s min_k (D(k, y) - eps^s_k)
//! lower_y = -mean_s max_k (D(y, k) + eps^s_k)
//! ```
//!
//! This is the value of the pair of LPs `max/min w_y` over `(w, z)` with
//! `w_y + eps^s_y <= z_s`, `E_p[w] = G*(p)`, `E[z] = 0`.

use crate::error::{MtaError, Result};
use crate::shocks::DiscreteShocks;
use crate::surplus::CcpVector;

use super::TransportSolution;

/// Mass above which a cell counts as part of the coupling's support.
const SUPPORT_TOL: f64 = 1e-12;

/// Componentwise bounds on normalised payoffs consistent with `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentifiedSetBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub width: Vec<f64>,
}

impl IdentifiedSetBounds {
    pub fn max_width(&self) -> f64 {
        self.width.iter().copied().fold(0.0, f64::max)
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        w.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(w, (lo, hi))| *w >= lo - tol && *w <= hi + tol)
    }
}

pub fn identified_set_bounds(
    p: &CcpVector,
    shocks: &DiscreteShocks,
    base: &TransportSolution,
) -> Result<IdentifiedSetBounds> {
    let ny = shocks.n_actions();
    let ns = shocks.n_points();
    if p.len() != ny {
        return Err(MtaError::DimensionMismatch {
            what: "choice probabilities vs shock dimension",
            expected: ny,
            got: p.len(),
        });
    }
    if base.n_actions() != ny || base.n_points() != ns {
        return Err(MtaError::DimensionMismatch {
            what: "base solution vs shocks",
            expected: ny * ns,
            got: base.n_actions() * base.n_points(),
        });
    }
    if !p.is_interior() {
        return Err(MtaError::NotInterior {
            probs: p.probs().to_vec(),
        });
    }
    let rows = base.row_sums();
    for (y, (r, q)) in rows.iter().zip(p.probs()).enumerate() {
        if (r - q).abs() > 1e-9 {
            return Err(MtaError::InconsistentBase(format!(
                "coupling row {y} carries {r}, expected {q}"
            )));
        }
    }

    let mut d = vec![f64::INFINITY; ny * ny];
    for e in base.coupling.iter().filter(|e| e.mass > SUPPORT_TOL) {
        let eps = shocks.point(e.point);
        let a = e.action;
        for b in 0..ny {
            let gap = eps[a] - eps[b];
            if gap < d[a * ny + b] {
                d[a * ny + b] = gap;
            }
        }
    }
    for k in 0..ny {
        for i in 0..ny {
            let dik = d[i * ny + k];
            if dik == f64::INFINITY {
                continue;
            }
            for j in 0..ny {
                let via = dik + d[k * ny + j];
                if via < d[i * ny + j] {
                    d[i * ny + j] = via;
                }
            }
        }
    }
    let scale = 1.0 + shocks.points().iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    for a in 0..ny {
        let cycle = d[a * ny + a];
        if cycle < -1e-8 * scale {
            return Err(MtaError::InconsistentBase(format!(
                "coupling is not optimal: cycle of gain {cycle:e} through action {a}"
            )));
        }
        d[a * ny + a] = 0.0;
    }

    let w = shocks.weight();
    let mut lower = vec![0.0; ny];
    let mut upper = vec![0.0; ny];
    for y in 0..ny {
        let mut up = 0.0;
        let mut lo = 0.0;
        for eps in shocks.rows() {
            let mut best_up = f64::INFINITY;
            let mut best_lo = f64::NEG_INFINITY;
            for k in 0..ny {
                best_up = best_up.min(d[k * ny + y] - eps[k]);
                best_lo = best_lo.max(d[y * ny + k] + eps[k]);
            }
            up += best_up;
            lo += best_lo;
        }
        upper[y] = w * up;
        lower[y] = -w * lo;
    }
    let width = lower
        .iter()
        .zip(&upper)
        .map(|(l, u)| (u - l).max(0.0))
        .collect();
    Ok(IdentifiedSetBounds {
        lower,
        upper,
        width,
    })
}
