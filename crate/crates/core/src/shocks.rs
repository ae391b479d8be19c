//! Utility-shock distributions and their equally weighted discrete approximations.
//!
//! Draws are generated by a ChaCha8 stream seeded with `seed_from_u64(seed)`.
//! Each support point consumes the stream in a fixed order:
//!
//! * `GumbelIid`: one `Open01` uniform per action, mapped through `-scale * ln(-ln u)`.
//! * `MultivariateNormal`: one standard normal per action (ziggurat, `rand_distr::StandardNormal`),
//!   then `mean + L n` with `L` the lower-triangular factor of the covariance.
//! * `Mixture`: one `[0, 1)` uniform selects the component by cumulative weight, then the
//!   component draws as above.
//!
//! The mapping is frozen by the golden-file tests in `tests/shocks_golden.rs`.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{MtaError, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-12;
const MAX_NORMAL_DIM: usize = 64;

/// Family of the joint distribution of the additive utility shocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ShockSpec {
    /// Independent type-I extreme value shocks with location 0.
    GumbelIid { scale: f64, dim: usize },
    /// Joint normal shocks; the covariance may be singular.
    MultivariateNormal { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    /// Finite mixture of same-dimension shock laws.
    Mixture {
        weights: Vec<f64>,
        components: Vec<ShockSpec>,
    },
    /// Binary-choice law whose action-0 shock at state `x` is `N(0, 1)` with weight `b`
    /// and `N(0, 1/(1+a x))` with weight `1-b`; action 1 carries a zero shock. Resolve with [`ShockSpec::at_state`].
    StateDependentNormalMixture { a: f64, b: f64 },
}

impl ShockSpec {
    pub fn gumbel(dim: usize) -> Self {
        ShockSpec::GumbelIid { scale: 1.0, dim }
    }

    /// Number of actions the shock vector covers.
    pub fn dimension(&self) -> usize {
        match self {
            ShockSpec::GumbelIid { dim, .. } => *dim,
            ShockSpec::MultivariateNormal { mean, .. } => mean.len(),
            ShockSpec::Mixture { components, .. } => {
                components.first().map(ShockSpec::dimension).unwrap_or(0)
            }
            ShockSpec::StateDependentNormalMixture { .. } => 2,
        }
    }

    pub fn is_state_dependent(&self) -> bool {
        match self {
            ShockSpec::StateDependentNormalMixture { .. } => true,
            ShockSpec::Mixture { components, .. } => {
                components.iter().any(ShockSpec::is_state_dependent)
            }
            _ => false,
        }
    }

    /// Shock law at state `x`. State-independent specs are returned unchanged.
    pub fn at_state(&self, x: usize) -> Result<ShockSpec> {
        match self {
            ShockSpec::StateDependentNormalMixture { a, b } => mixture_for_state(*a, *b, x),
            ShockSpec::Mixture {
                weights,
                components,
            } => Ok(ShockSpec::Mixture {
                weights: weights.clone(),
                components: components
                    .iter()
                    .map(|c| c.at_state(x))
                    .collect::<Result<_>>()?,
            }),
            other => Ok(other.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler().map(|_| ())
    }

    /// Builds a reusable sampler, validating the spec on the way.
    pub fn sampler(&self) -> Result<ShockSampler> {
        let kind = self.sampler_kind("shocks")?;
        Ok(ShockSampler {
            dim: self.dimension(),
            kind,
        })
    }

    fn sampler_kind(&self, path: &str) -> Result<SamplerKind> {
        match self {
            ShockSpec::GumbelIid { scale, dim } => {
                if *dim < 2 {
                    return Err(MtaError::validation(
                        format!("{path}.dim"),
                        format!("dimension must be at least 2, got {dim}"),
                    ));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(MtaError::validation(
                        format!("{path}.scale"),
                        format!("scale must be positive and finite, got {scale}"),
                    ));
                }
                Ok(SamplerKind::Gumbel { scale: *scale })
            }
            ShockSpec::MultivariateNormal { mean, cov } => {
                let n = mean.len();
                if n < 2 {
                    return Err(MtaError::validation(
                        format!("{path}.mean"),
                        format!("dimension must be at least 2, got {n}"),
                    ));
                }
                if n > MAX_NORMAL_DIM {
                    return Err(MtaError::validation(
                        format!("{path}.mean"),
                        format!("dimension {n} exceeds the supported maximum {MAX_NORMAL_DIM}"),
                    ));
                }
                if mean.iter().any(|m| !m.is_finite()) {
                    return Err(MtaError::validation(
                        format!("{path}.mean"),
                        "entries must be finite",
                    ));
                }
                if cov.len() != n || cov.iter().any(|row| row.len() != n) {
                    return Err(MtaError::validation(
                        format!("{path}.cov"),
                        format!("covariance must be {n}x{n}"),
                    ));
                }
                let factor = psd_factor(cov).map_err(|reason| {
                    MtaError::validation(format!("{path}.cov"), reason)
                })?;
                Ok(SamplerKind::Normal {
                    mean: mean.clone(),
                    factor,
                })
            }
            ShockSpec::Mixture {
                weights,
                components,
            } => {
                if components.is_empty() || weights.len() != components.len() {
                    return Err(MtaError::validation(
                        format!("{path}.weights"),
                        format!(
                            "need one weight per component ({} weights, {} components)",
                            weights.len(),
                            components.len()
                        ),
                    ));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(MtaError::validation(
                        format!("{path}.weights"),
                        "weights must be nonnegative",
                    ));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_TOL {
                    return Err(MtaError::validation(
                        format!("{path}.weights"),
                        format!("weights must sum to 1, got {total}"),
                    ));
                }
                let dim = components[0].dimension();
                let mut cumulative = Vec::with_capacity(weights.len());
                let mut acc = 0.0;
                let mut parts = Vec::with_capacity(components.len());
                for (i, (w, c)) in weights.iter().zip(components).enumerate() {
                    if c.dimension() != dim {
                        return Err(MtaError::validation(
                            format!("{path}.components[{i}]"),
                            format!("dimension {} differs from {dim}", c.dimension()),
                        ));
                    }
                    acc += w;
                    cumulative.push(acc);
                    parts.push(c.sampler_kind(&format!("{path}.components[{i}]"))?);
                }
                Ok(SamplerKind::Mixture {
                    cumulative,
                    components: parts,
                })
            }
            ShockSpec::StateDependentNormalMixture { a, b } => {
                if !(0.0..=1.0).contains(b) {
                    return Err(MtaError::validation(
                        format!("{path}.b"),
                        format!("mixture weight must lie in [0, 1], got {b}"),
                    ));
                }
                if !a.is_finite() {
                    return Err(MtaError::validation(format!("{path}.a"), "must be finite"));
                }
                Err(MtaError::validation(
                    path.to_string(),
                    "state-dependent shock law must be resolved with at_state before sampling",
                ))
            }
        }
    }
}

/// Two-component normal mixture for the shock difference at state `x`: weight `b` on
/// `N(0, 1)` and `1 - b` on `N(0, 1/(1 + a x))`, expressed on two actions with the
/// second action's shock fixed at zero.
pub fn mixture_for_state(a: f64, b: f64, x: usize) -> Result<ShockSpec> {
    if !(0.0..=1.0).contains(&b) {
        return Err(MtaError::validation(
            "b",
            format!("mixture weight must lie in [0, 1], got {b}"),
        ));
    }
    let denom = 1.0 + a * x as f64;
    if !(denom.is_finite() && denom > 0.0) {
        return Err(MtaError::validation(
            "a",
            format!("variance 1/(1 + a*x) is not positive at x = {x} (1 + a*x = {denom})"),
        ));
    }
    let binary = |variance: f64| ShockSpec::MultivariateNormal {
        mean: vec![0.0, 0.0],
        cov: vec![vec![variance, 0.0], vec![0.0, 0.0]],
    };
    if b == 1.0 {
        return Ok(binary(1.0));
    }
    if b == 0.0 {
        return Ok(binary(1.0 / denom));
    }
    Ok(ShockSpec::Mixture {
        weights: vec![b, 1.0 - b],
        components: vec![binary(1.0), binary(1.0 / denom)],
    })
}

/// Lower-triangular factor `L` (row-major) with `L L' = cov` for a symmetric PSD matrix.
/// Columns belonging to a zero pivot are zeroed, so singular covariances are accepted.
fn psd_factor(cov: &[Vec<f64>]) -> std::result::Result<Vec<f64>, String> {
    let n = cov.len();
    let scale = (0..n).map(|i| cov[i][i].abs()).fold(1.0_f64, f64::max);
    for i in 0..n {
        for j in 0..i {
            if !cov[i][j].is_finite() || (cov[i][j] - cov[j][i]).abs() > SYMMETRY_TOL * scale {
                return Err(format!("covariance is not symmetric at ({i}, {j})"));
            }
        }
    }
    let tol = 1e-12 * scale;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let d = cov[j][j] - (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum::<f64>();
        if d < -tol {
            return Err(format!("covariance is not positive semi-definite (pivot {j} = {d})"));
        }
        if d <= tol {
            for i in (j + 1)..n {
                let r = cov[i][j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
                if r.abs() > 1e-9 * scale {
                    return Err(format!(
                        "covariance is not positive semi-definite (zero pivot {j}, residual {r})"
                    ));
                }
            }
            continue;
        }
        let root = d.sqrt();
        l[j * n + j] = root;
        for i in (j + 1)..n {
            let r = cov[i][j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            l[i * n + j] = r / root;
        }
    }
    Ok(l)
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Gumbel {
        scale: f64,
    },
    Normal {
        mean: Vec<f64>,
        factor: Vec<f64>,
    },
    Mixture {
        cumulative: Vec<f64>,
        components: Vec<SamplerKind>,
    },
}

impl SamplerKind {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            SamplerKind::Gumbel { scale } => {
                for e in out.iter_mut() {
                    let u: f64 = rng.sample(Open01);
                    *e = -scale * (-u.ln()).ln();
                }
            }
            SamplerKind::Normal { mean, factor } => {
                let n = mean.len();
                let mut buf = [0.0_f64; MAX_NORMAL_DIM];
                let z = &mut buf[..n];
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for i in 0..n {
                    let row = &factor[i * n..i * n + i + 1];
                    out[i] = mean[i] + row.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            SamplerKind::Mixture {
                cumulative,
                components,
            } => {
                let u: f64 = rng.random();
                let k = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(components.len() - 1);
                components[k].draw(rng, out);
            }
        }
    }
}

/// Validated sampler for a [`ShockSpec`].
#[derive(Clone, Debug)]
pub struct ShockSampler {
    dim: usize,
    kind: SamplerKind,
}

impl ShockSampler {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Writes one shock vector into `out` (length must equal the dimension).
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        self.kind.draw(rng, out);
    }
}

/// Mixes a master seed with a stream index (SplitMix64 finalizer). Every derived
/// seed in the crate goes through this function.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Portable RNG used for every random draw in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `S` equally weighted shock vectors approximating a continuous shock law.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteShocks {
    points: Vec<f64>,
    n_points: usize,
    n_actions: usize,
    seed: Option<u64>,
    source: Option<ShockSpec>,
}

impl DiscreteShocks {
    /// Wraps explicit support points (one vector per point).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_points = rows.len();
        if n_points == 0 {
            return Err(MtaError::validation("shocks", "need at least one support point"));
        }
        let n_actions = rows[0].len();
        if n_actions == 0 {
            return Err(MtaError::validation("shocks", "need at least one action"));
        }
        let mut points = Vec::with_capacity(n_points * n_actions);
        for (s, row) in rows.into_iter().enumerate() {
            if row.len() != n_actions {
                return Err(MtaError::DimensionMismatch {
                    what: "shock support point",
                    expected: n_actions,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MtaError::validation(
                    format!("shocks[{s}]"),
                    "entries must be finite",
                ));
            }
            points.extend(row);
        }
        Ok(Self {
            points,
            n_points,
            n_actions,
            seed: None,
            source: None,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Common probability mass of every support point, `1/S`.
    pub fn weight(&self) -> f64 {
        1.0 / self.n_points as f64
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn source(&self) -> Option<&ShockSpec> {
        self.source.as_ref()
    }

    /// Shock vector of support point `s`.
    #[inline]
    pub fn point(&self, s: usize) -> &[f64] {
        &self.points[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Row-major `S x |Y|` matrix of shock values.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.n_actions)
    }

    pub fn column_mean(&self, y: usize) -> f64 {
        self.rows().map(|r| r[y]).sum::<f64>() / self.n_points as f64
    }

    /// Support points restricted to a subset of actions, in the given order.
    pub fn restrict_actions(&self, actions: &[usize]) -> Result<DiscreteShocks> {
        if actions.is_empty() {
            return Err(MtaError::validation("actions", "empty action subset"));
        }
        if let Some(&bad) = actions.iter().find(|&&a| a >= self.n_actions) {
            return Err(MtaError::validation(
                "actions",
                format!("action {bad} out of range for {} actions", self.n_actions),
            ));
        }
        let mut points = Vec::with_capacity(self.n_points * actions.len());
        for row in self.rows() {
            points.extend(actions.iter().map(|&a| row[a]));
        }
        Ok(DiscreteShocks {
            points,
            n_points: self.n_points,
            n_actions: actions.len(),
            seed: self.seed,
            source: None,
        })
    }

    /// Audit dump with columns `s, eps_0, .., eps_{|Y|-1}`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["s".to_string()];
        header.extend((0..self.n_actions).map(|y| format!("eps_{y}")));
        out.write_record(&header)?;
        for (s, row) in self.rows().enumerate() {
            let mut record = vec![s.to_string()];
            record.extend(row.iter().map(|v| format!("{v:.17e}")));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Draws `n_points` i.i.d. support points from `spec`, each weighted `1/n_points`.
pub fn discretize(spec: &ShockSpec, n_points: usize, seed: u64) -> Result<DiscreteShocks> {
    if n_points == 0 {
        return Err(MtaError::validation("points", "S must be at least 1"));
    }
    let sampler = spec.sampler()?;
    let dim = sampler.dimension();
    let mut rng = rng_from_seed(seed);
    let mut points = vec![0.0; n_points * dim];
    for row in points.chunks_exact_mut(dim) {
        sampler.draw_into(&mut rng, row);
    }
    Ok(DiscreteShocks {
        points,
        n_points,
        n_actions: dim,
        seed: Some(seed),
        source: Some(spec.clone()),
    })
}

/// Discretized shocks for every state of a model.
#[derive(Clone, Debug)]
pub struct StateShocks {
    per_state: Vec<Arc<DiscreteShocks>>,
}

impl StateShocks {
    /// One discretization per state. A state-independent spec is drawn once with
    /// `seed` and shared; a state-dependent spec is drawn at state `x` with
    /// `derive_seed(seed, x)`.
    pub fn discretize(spec: &ShockSpec, n_states: usize, n_points: usize, seed: u64) -> Result<Self> {
        if n_states == 0 {
            return Err(MtaError::validation("n_states", "need at least one state"));
        }
        let per_state = if spec.is_state_dependent() {
            (0..n_states)
                .map(|x| {
                    let local = spec.at_state(x)?;
                    discretize(&local, n_points, derive_seed(seed, x as u64)).map(Arc::new)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            let shared = Arc::new(discretize(spec, n_points, seed)?);
            vec![shared; n_states]
        };
        Ok(Self { per_state })
    }

    /// Uses the same support points at every state.
    pub fn shared(shocks: DiscreteShocks, n_states: usize) -> Self {
        let shared = Arc::new(shocks);
        Self {
            per_state: vec![shared; n_states],
        }
    }

    pub fn from_states(per_state: Vec<DiscreteShocks>) -> Self {
        Self {
            per_state: per_state.into_iter().map(Arc::new).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.per_state.len()
    }

    pub fn at(&self, x: usize) -> &DiscreteShocks {
        &self.per_state[x]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal2() -> ShockSpec {
        ShockSpec::MultivariateNormal {
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        }
    }

    #[test]
    fn discretize_is_deterministic() {
        let a = discretize(&normal2(), 3, 7).unwrap();
        let b = discretize(&normal2(), 3, 7).unwrap();
        assert_eq!(a.points(), b.points());
        assert_eq!(a.n_points(), 3);
        assert_eq!(a.n_actions(), 2);
        let c = discretize(&normal2(), 3, 8).unwrap();
        assert_ne!(a.points(), c.points());
    }

    #[test]
    fn single_point_has_unit_weight() {
        let d = discretize(&ShockSpec::gumbel(3), 1, 11).unwrap();
        assert_eq!(d.weight(), 1.0);
        assert_eq!(d.point(0).len(), 3);
        // First row of a longer draw with the same seed.
        let longer = discretize(&ShockSpec::gumbel(3), 5, 11).unwrap();
        assert_eq!(d.point(0), longer.point(0));
    }

    #[test]
    fn gumbel_column_means_near_euler_gamma() {
        let d = discretize(&ShockSpec::gumbel(2), 100_000, 3).unwrap();
        for y in 0..2 {
            let m = d.column_mean(y);
            assert!((m - crate::surplus::EULER_GAMMA).abs() < 0.02, "mean {m}");
        }
    }

    #[test]
    fn rejects_non_psd_covariance() {
        let spec = ShockSpec::MultivariateNormal {
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        };
        let err = discretize(&spec, 10, 1).unwrap_err();
        assert!(err.to_string().contains("shocks.cov"), "{err}");
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let spec = ShockSpec::MultivariateNormal {
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 0.5], vec![0.4, 1.0]],
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rejects_bad_mixture_weights() {
        let spec = ShockSpec::Mixture {
            weights: vec![0.5, 0.6],
            components: vec![normal2(), normal2()],
        };
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("shocks.weights"), "{err}");
        let negative = ShockSpec::Mixture {
            weights: vec![1.5, -0.5],
            components: vec![normal2(), normal2()],
        };
        assert!(negative.validate().is_err());
    }

    #[test]
    fn rejects_dimension_one() {
        assert!(ShockSpec::gumbel(1).validate().is_err());
    }

    #[test]
    fn singular_covariance_is_accepted() {
        let spec = ShockSpec::MultivariateNormal {
            mean: vec![0.0; 3],
            cov: vec![
                vec![0.5, 0.5, 0.0],
                vec![0.5, 1.0, 0.0],
                vec![0.0, 0.0, 0.0],
            ],
        };
        let d = discretize(&spec, 20_000, 5).unwrap();
        assert!(d.rows().all(|r| r[2] == 0.0));
        let n = d.n_points() as f64;
        let var0 = d.rows().map(|r| r[0] * r[0]).sum::<f64>() / n;
        let cov01 = d.rows().map(|r| r[0] * r[1]).sum::<f64>() / n;
        assert!((var0 - 0.5).abs() < 0.03, "{var0}");
        assert!((cov01 - 0.5).abs() < 0.03, "{cov01}");
    }

    #[test]
    fn mixture_for_state_matches_bus_law() {
        let at0 = mixture_for_state(0.1, 0.5, 0).unwrap();
        match &at0 {
            ShockSpec::Mixture {
                weights,
                components,
            } => {
                assert_eq!(weights, &vec![0.5, 0.5]);
                for c in components {
                    match c {
                        ShockSpec::MultivariateNormal { cov, .. } => assert_eq!(cov[0][0], 1.0),
                        other => panic!("unexpected component {other:?}"),
                    }
                }
            }
            other => panic!("expected mixture, got {other:?}"),
        }
        match mixture_for_state(0.1, 0.5, 10).unwrap() {
            ShockSpec::Mixture { components, .. } => match &components[1] {
                ShockSpec::MultivariateNormal { cov, .. } => assert!((cov[0][0] - 0.5).abs() < 1e-15),
                other => panic!("unexpected component {other:?}"),
            },
            other => panic!("expected mixture, got {other:?}"),
        }
    }

    #[test]
    fn mixture_collapses_to_standard_normal() {
        for x in [0, 3, 29] {
            let spec = mixture_for_state(0.0, 1.0, x).unwrap();
            assert_eq!(
                spec,
                ShockSpec::MultivariateNormal {
                    mean: vec![0.0, 0.0],
                    cov: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
                }
            );
        }
    }

    #[test]
    fn mixture_for_state_rejects_nonpositive_variance() {
        assert!(mixture_for_state(-0.5, 0.5, 2).is_err());
        assert!(mixture_for_state(0.1, 1.5, 2).is_err());
    }

    #[test]
    fn state_dependent_spec_needs_resolution() {
        let spec = ShockSpec::StateDependentNormalMixture { a: 0.1, b: 0.5 };
        assert!(discretize(&spec, 10, 1).is_err());
        let states = StateShocks::discretize(&spec, 4, 10, 1).unwrap();
        assert_eq!(states.n_states(), 4);
        assert_ne!(states.at(0).points(), states.at(1).points());
    }

    #[test]
    fn shared_states_reuse_one_draw() {
        let states = StateShocks::discretize(&ShockSpec::gumbel(2), 3, 10, 9).unwrap();
        assert_eq!(states.at(0).points(), states.at(2).points());
        assert_eq!(states.at(0).seed(), Some(9));
    }

    #[test]
    fn restrict_actions_selects_columns() {
        let d = DiscreteShocks::from_rows(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let r = d.restrict_actions(&[2, 0]).unwrap();
        assert_eq!(r.points(), &[3.0, 1.0, 6.0, 4.0]);
    }

    #[test]
    fn csv_dump_has_expected_header() {
        let d = DiscreteShocks::from_rows(vec![vec![0.5, -1.0]]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,eps_0,eps_1\n0,"), "{text}");
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(42, 0));
    }
}
