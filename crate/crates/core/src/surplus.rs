//! Social surplus `G(w) = E[max_y (w_y + eps_y)]` on discretized shocks, the induced
//! choice probabilities, and closed-form logit references.

use crate::error::{MtaError, Result};
use crate::shocks::DiscreteShocks;

/// Euler–Mascheroni constant, the mean of a standard Gumbel variable.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SIMPLEX_TOL: f64 = 1e-12;

/// Choice-specific values `w_y`, one per action.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffVector(Vec<f64>);

impl PayoffVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(MtaError::validation("payoffs", "need at least one action"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MtaError::validation(
                format!("payoffs[{i}]"),
                format!("entry must be finite, got {}", values[i]),
            ));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `w + k * 1`.
    pub fn shifted(&self, k: f64) -> PayoffVector {
        PayoffVector(self.0.iter().map(|v| v + k).collect())
    }
}

impl std::ops::Index<usize> for PayoffVector {
    type Output = f64;
    fn index(&self, y: usize) -> &f64 {
        &self.0[y]
    }
}

/// Conditional choice probabilities at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct CcpVector {
    probs: Vec<f64>,
    interior: bool,
}

impl CcpVector {
    /// Validates simplex membership (nonnegative, sums to one within 1e-12).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(MtaError::validation("ccp", "need at least one action"));
        }
        if let Some(i) = probs.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(MtaError::validation(
                format!("ccp[{i}]"),
                format!("probability must be nonnegative, got {}", probs[i]),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(MtaError::validation(
                "ccp",
                format!("probabilities must sum to 1, got {total}"),
            ));
        }
        let interior = probs.iter().all(|&p| p > 0.0);
        Ok(Self { probs, interior })
    }

    /// Frequencies from nonnegative counts; `None` when every count is zero.
    pub fn from_counts(counts: &[usize]) -> Option<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return None;
        }
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let interior = counts.iter().all(|&c| c > 0);
        Some(Self { probs, interior })
    }

    /// Uniform distribution over `n` actions.
    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
            interior: n > 0,
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// All probabilities strictly positive.
    pub fn is_interior(&self) -> bool {
        self.interior
    }

    /// Actions with positive probability, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(y, _)| y)
            .collect()
    }

    /// Probabilities of `actions`, renormalized.
    pub fn restrict(&self, actions: &[usize]) -> Result<CcpVector> {
        let sub: Vec<f64> = actions.iter().map(|&a| self.probs[a]).collect();
        let total: f64 = sub.iter().sum();
        if total <= 0.0 {
            return Err(MtaError::validation("ccp", "restriction has zero mass"));
        }
        CcpVector::new(sub.iter().map(|p| p / total).collect())
    }
}

impl std::ops::Index<usize> for CcpVector {
    type Output = f64;
    fn index(&self, y: usize) -> &f64 {
        &self.probs[y]
    }
}

fn check_dims(w: &PayoffVector, shocks: &DiscreteShocks) -> Result<()> {
    if w.len() != shocks.n_actions() {
        return Err(MtaError::DimensionMismatch {
            what: "payoff vector vs shock dimension",
            expected: shocks.n_actions(),
            got: w.len(),
        });
    }
    Ok(())
}

#[inline]
fn max_index(w: &[f64], eps: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_val = w[0] + eps[0];
    for y in 1..w.len() {
        let v = w[y] + eps[y];
        if v > best_val {
            best = y;
            best_val = v;
        }
    }
    (best, best_val)
}

/// `G(w) = (1/S) sum_s max_y (w_y + eps^s_y)`, summed in index order.
pub fn surplus_value(w: &PayoffVector, shocks: &DiscreteShocks) -> Result<f64> {
    check_dims(w, shocks)?;
    let w = w.as_slice();
    let total: f64 = shocks.rows().map(|eps| max_index(w, eps).1).sum();
    Ok(total / shocks.n_points() as f64)
}

/// Lowest-index maximizer of `w_y + eps_y`.
pub fn argmax_choice(w: &PayoffVector, eps: &[f64]) -> Result<usize> {
    if w.len() != eps.len() {
        return Err(MtaError::DimensionMismatch {
            what: "payoff vector vs shock vector",
            expected: w.len(),
            got: eps.len(),
        });
    }
    Ok(max_index(w.as_slice(), eps).0)
}

/// Share of support points at which each action is the (lowest-index) optimum.
pub fn choice_probs(w: &PayoffVector, shocks: &DiscreteShocks) -> Result<CcpVector> {
    check_dims(w, shocks)?;
    let mut counts = vec![0usize; w.len()];
    for eps in shocks.rows() {
        counts[max_index(w.as_slice(), eps).0] += 1;
    }
    Ok(CcpVector::from_counts(&counts).expect("shocks hold at least one point"))
}

/// Number of support points whose maximum is attained by two or more actions
/// within `tol`. Positive counts mean `choice_probs` depends on the tie-break.
pub fn count_ties(w: &PayoffVector, shocks: &DiscreteShocks, tol: f64) -> Result<usize> {
    check_dims(w, shocks)?;
    let w = w.as_slice();
    Ok(shocks
        .rows()
        .filter(|eps| {
            let (_, best) = max_index(w, eps);
            w.iter()
                .zip(eps.iter())
                .filter(|(a, b)| best - (*a + *b) <= tol)
                .count()
                > 1
        })
        .count())
}

/// Closed-form logit surplus `log sum_y exp(w_y) + gamma`.
pub fn logit_surplus(w: &[f64]) -> f64 {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + w.iter().map(|v| (v - m).exp()).sum::<f64>().ln() + EULER_GAMMA
}

/// Closed-form logit choice probabilities (the gradient of [`logit_surplus`]).
pub fn logit_probs(w: &[f64]) -> Vec<f64> {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = w.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// The logit payoff vector with zero surplus that generates `p`: `log p_y - gamma`.
pub fn logit_oracle_w0(p: &CcpVector) -> Result<PayoffVector> {
    if !p.is_interior() {
        return Err(MtaError::NotInterior {
            probs: p.probs().to_vec(),
        });
    }
    PayoffVector::new(p.probs().iter().map(|q| q.ln() - EULER_GAMMA).collect())
}

/// Logit conjugate surplus `sum_y p_y log p_y - gamma`; +inf off the interior.
pub fn logit_gstar(p: &CcpVector) -> Result<f64> {
    if !p.is_interior() {
        return Err(MtaError::Domain {
            probs: p.probs().to_vec(),
        });
    }
    Ok(p.probs().iter().map(|q| q * q.ln()).sum::<f64>() - EULER_GAMMA)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shocks::{discretize, ShockSpec};

    fn pv(v: &[f64]) -> PayoffVector {
        PayoffVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_zero_shock_gives_max() {
        let shocks = DiscreteShocks::from_rows(vec![vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(surplus_value(&pv(&[0.3, -1.0, 2.5]), &shocks).unwrap(), 2.5);
    }

    #[test]
    fn surplus_shifts_with_constant() {
        let shocks = discretize(&ShockSpec::gumbel(3), 200, 4).unwrap();
        let w = pv(&[0.1, -0.4, 0.9]);
        let base = surplus_value(&w, &shocks).unwrap();
        let shifted = surplus_value(&w.shifted(2.5), &shocks).unwrap();
        assert!((shifted - base - 2.5).abs() < 1e-12);
    }

    #[test]
    fn gumbel_surplus_matches_logit_closed_form() {
        let shocks = discretize(&ShockSpec::gumbel(2), 100_000, 21).unwrap();
        let g = surplus_value(&pv(&[0.0, 0.0]), &shocks).unwrap();
        assert!((g - (2f64.ln() + EULER_GAMMA)).abs() < 0.02, "{g}");
        let p = choice_probs(&pv(&[0.0, 0.0]), &shocks).unwrap();
        assert!((p[0] - 0.5).abs() < 0.01);
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax_choice(&pv(&[1.0, 0.0]), &[0.0, 0.0]).unwrap(), 0);
        assert_eq!(argmax_choice(&pv(&[0.0, 0.0]), &[0.0, 0.0]).unwrap(), 0);
        assert_eq!(argmax_choice(&pv(&[0.0, 2.0]), &[1.0, 0.0]).unwrap(), 1);
        assert!(argmax_choice(&pv(&[0.0, 2.0]), &[1.0]).is_err());
    }

    #[test]
    fn dominant_payoff_takes_all_mass() {
        let shocks = discretize(
            &ShockSpec::MultivariateNormal {
                mean: vec![0.0, 0.0],
                cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
            500,
            2,
        )
        .unwrap();
        let p = choice_probs(&pv(&[1e6, 0.0]), &shocks).unwrap();
        assert_eq!(p.probs(), &[1.0, 0.0]);
        assert!(!p.is_interior());
    }

    #[test]
    fn choice_probs_translation_invariant() {
        let shocks = discretize(&ShockSpec::gumbel(3), 300, 8).unwrap();
        let w = pv(&[0.2, 0.0, -0.3]);
        assert_eq!(
            choice_probs(&w, &shocks).unwrap(),
            choice_probs(&w.shifted(-7.0), &shocks).unwrap()
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let shocks = DiscreteShocks::from_rows(vec![vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            surplus_value(&pv(&[0.0, 0.0, 0.0]), &shocks),
            Err(MtaError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn logit_oracle_examples() {
        let half = CcpVector::new(vec![0.5, 0.5]).unwrap();
        let w0 = logit_oracle_w0(&half).unwrap();
        for y in 0..2 {
            assert!((w0[y] - (-1.270_362_845_461_478)).abs() < 1e-12, "{}", w0[y]);
        }
        let third = CcpVector::new(vec![1.0 / 3.0; 3]).unwrap();
        let w0 = logit_oracle_w0(&third).unwrap();
        for y in 0..3 {
            assert!((w0[y] - (-(3f64.ln()) - EULER_GAMMA)).abs() < 1e-12);
            assert!((w0[y] - (-1.675_827_953_569_642)).abs() < 1e-12);
        }
        assert!(logit_surplus(w0.as_slice()).abs() < 1e-12);
    }

    #[test]
    fn logit_gstar_examples() {
        let half = CcpVector::new(vec![0.5, 0.5]).unwrap();
        assert!((logit_gstar(&half).unwrap() - (0.5f64.ln() - EULER_GAMMA)).abs() < 1e-12);
        let third = CcpVector::new(vec![1.0 / 3.0; 3]).unwrap();
        assert!((logit_gstar(&third).unwrap() + 3f64.ln() + EULER_GAMMA).abs() < 1e-12);
        let edge = CcpVector::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(logit_gstar(&edge), Err(MtaError::Domain { .. })));
        assert!(matches!(
            logit_oracle_w0(&edge),
            Err(MtaError::NotInterior { .. })
        ));
    }

    #[test]
    fn ccp_validation() {
        assert!(CcpVector::new(vec![0.5, 0.6]).is_err());
        assert!(CcpVector::new(vec![-0.1, 1.1]).is_err());
        let p = CcpVector::new(vec![0.25, 0.0, 0.75]).unwrap();
        assert!(!p.is_interior());
        assert_eq!(p.support(), vec![0, 2]);
        assert!(CcpVector::from_counts(&[0, 0]).is_none());
        assert!(CcpVector::from_counts(&[2, 2]).unwrap().is_interior());
    }

    #[test]
    fn ties_are_counted() {
        let shocks = DiscreteShocks::from_rows(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(count_ties(&pv(&[0.0, 0.0]), &shocks, 0.0).unwrap(), 1);
    }
}
