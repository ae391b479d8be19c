//! Resource-extraction benchmark: model construction, panel simulation, frequency
//! estimators, fit metrics and identified-set sweeps.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddc::{
    estimate, solve_model, DdcModel, EstimationOptions, EstimationResult, ModelSolution,
    TransitionMatrix, UnusableStatePolicy, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::error::{MtaError, Result};
use crate::shocks::{derive_seed, discretize, rng_from_seed, ShockSampler, ShockSpec, StateShocks};
use crate::surplus::{argmax_choice, CcpVector, PayoffVector};
use crate::transport::{identified_set_bounds, invert_ccp};

/// Parameters of the resource-extraction model. State index `i` is pool size `i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResourceModelSpec {
    pub n_states: usize,
    /// Multinomial weights over the four transition offsets.
    pub pi: [f64; 4],
    pub beta: f64,
    /// Covariance of `(eps_0 - eps_2, eps_1 - eps_2)`.
    pub cov: [[f64; 2]; 2],
}

impl Default for ResourceModelSpec {
    fn default() -> Self {
        Self {
            n_states: 30,
            pi: [0.3, 0.35, 0.25, 0.10],
            beta: 0.9,
            cov: [[0.5, 0.5], [0.5, 1.0]],
        }
    }
}

/// Action whose flow is normalised to zero (waiting).
pub const RESOURCE_BENCHMARK: usize = 2;

impl ResourceModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_states < 4 {
            return Err(MtaError::validation("model.n_states", "need at least 4 states"));
        }
        if self.pi.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(MtaError::validation("model.pi", "weights must be nonnegative"));
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MtaError::validation("model.pi", format!("weights sum to {total}")));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(MtaError::validation("model.beta", "must lie in [0, 1)"));
        }
        self.shock_spec().validate()
    }

    /// Three-dimensional shock law with `eps_2 = 0` and the differences in the first two slots.
    pub fn shock_spec(&self) -> ShockSpec {
        let c = self.cov;
        ShockSpec::MultivariateNormal {
            mean: vec![0.0; 3],
            cov: vec![
                vec![c[0][0], c[0][1], 0.0],
                vec![c[1][0], c[1][1], 0.0],
                vec![0.0, 0.0, 0.0],
            ],
        }
    }

    /// True flows `[y][x]`: `0.5 sqrt(x) - 2`, `0.4 sqrt(x) - 2`, `0`.
    pub fn true_flows(&self) -> Vec<Vec<f64>> {
        let size = |i: usize| (i + 1) as f64;
        vec![
            (0..self.n_states).map(|i| 0.5 * size(i).sqrt() - 2.0).collect(),
            (0..self.n_states).map(|i| 0.4 * size(i).sqrt() - 2.0).collect(),
            vec![0.0; self.n_states],
        ]
    }

    fn kernel(&self, next: impl Fn(usize, usize) -> usize) -> Result<TransitionMatrix> {
        let n = self.n_states;
        let mut data = vec![0.0; n * n];
        for x in 1..=n {
            for (k, p) in self.pi.iter().enumerate() {
                // Coinciding targets accumulate their probabilities.
                let to = next(x, k).min(n);
                data[(x - 1) * n + (to - 1)] += p;
            }
        }
        TransitionMatrix::new(n, data)
    }

    /// Kernels for full extraction, partial extraction and waiting.
    pub fn transitions(&self) -> Result<Vec<TransitionMatrix>> {
        Ok(vec![
            self.kernel(|_, k| k + 1)?,
            self.kernel(|x, k| (k + 1).max((x + k).saturating_sub(10)))?,
            self.kernel(|x, k| x + k)?,
        ])
    }
}

pub fn build_resource_model(spec: &ResourceModelSpec) -> Result<DdcModel> {
    spec.validate()?;
    DdcModel::new(
        spec.beta,
        spec.transitions()?,
        spec.true_flows(),
        spec.shock_spec(),
        RESOURCE_BENCHMARK,
    )
}

/// One observed decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub agent: usize,
    pub period: usize,
    pub state: usize,
    pub action: usize,
}

/// Decisions sorted by agent, then period.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelData {
    pub records: Vec<PanelRecord>,
    pub n_agents: usize,
    pub n_periods: usize,
}

impl PanelData {
    pub fn new(mut records: Vec<PanelRecord>) -> Self {
        records.sort_by_key(|r| (r.agent, r.period));
        let n_agents = records.iter().map(|r| r.agent + 1).max().unwrap_or(0);
        let n_periods = records.iter().map(|r| r.period + 1).max().unwrap_or(0);
        Self {
            records,
            n_agents,
            n_periods,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Columns `agent,period,state,action`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["agent", "period", "state", "action"])?;
        for r in &self.records {
            out.serialize((r.agent, r.period, r.state, r.action))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn state_samplers(spec: &ShockSpec, n_states: usize) -> Result<Vec<ShockSampler>> {
    if spec.is_state_dependent() {
        (0..n_states).map(|x| spec.at_state(x)?.sampler()).collect()
    } else {
        let s = spec.sampler()?;
        Ok(vec![s; n_states])
    }
}

fn sample_row<R: Rng + ?Sized>(rng: &mut R, row: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, p) in row.iter().enumerate() {
        if *p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Simulates `n_agents` agents for `n_periods` periods under the solved model. Each agent
/// uses its own stream `derive_seed(seed, agent)`; initial states are uniform.
pub fn simulate_panel(
    solution: &ModelSolution,
    model: &DdcModel,
    n_agents: usize,
    n_periods: usize,
    seed: u64,
) -> Result<PanelData> {
    simulate(solution, model, None, n_agents, n_periods, seed)
}

/// As [`simulate_panel`], with initial states drawn from `initial`.
pub fn simulate_panel_from(
    solution: &ModelSolution,
    model: &DdcModel,
    initial: &[f64],
    n_agents: usize,
    n_periods: usize,
    seed: u64,
) -> Result<PanelData> {
    let nx = model.n_states();
    if initial.len() != nx {
        return Err(MtaError::DimensionMismatch {
            what: "initial distribution",
            expected: nx,
            got: initial.len(),
        });
    }
    let total: f64 = initial.iter().sum();
    if initial.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(MtaError::validation("initial distribution", "must be a probability vector"));
    }
    simulate(solution, model, Some(initial), n_agents, n_periods, seed)
}

fn simulate(
    solution: &ModelSolution,
    model: &DdcModel,
    initial: Option<&[f64]>,
    n_agents: usize,
    n_periods: usize,
    seed: u64,
) -> Result<PanelData> {
    model.validate()?;
    if n_agents == 0 || n_periods == 0 {
        return Err(MtaError::validation("panel", "N and T must be positive"));
    }
    let nx = model.n_states();
    let ny = model.n_actions();
    let samplers = state_samplers(&model.shocks, nx)?;
    let w: Vec<PayoffVector> = (0..nx)
        .map(|x| PayoffVector::new((0..ny).map(|y| solution.w[y][x]).collect()))
        .collect::<Result<_>>()?;
    let records: Vec<PanelRecord> = (0..n_agents)
        .into_par_iter()
        .flat_map_iter(|agent| {
            let mut rng = rng_from_seed(derive_seed(seed, agent as u64));
            let mut eps = vec![0.0; ny];
            let mut x = match initial {
                Some(dist) => sample_row(&mut rng, dist),
                None => rng.random_range(0..nx),
            };
            let mut out = Vec::with_capacity(n_periods);
            for period in 0..n_periods {
                samplers[x].draw_into(&mut rng, &mut eps);
                let y = argmax_choice(&w[x], &eps).expect("dimensions checked");
                out.push(PanelRecord {
                    agent,
                    period,
                    state: x,
                    action: y,
                });
                x = sample_row(&mut rng, model.transitions[y].row(x));
            }
            out
        })
        .collect();
    Ok(PanelData {
        records,
        n_agents,
        n_periods,
    })
}

/// Frequency estimates from a panel.
#[derive(Clone, Debug)]
pub struct FrequencyEstimates {
    /// `None` at unvisited states.
    pub ccps: Vec<Option<CcpVector>>,
    /// Empirical kernels; rows without observed transitions are all zero.
    pub transitions: Vec<TransitionMatrix>,
    pub visits: Vec<usize>,
    /// `action_counts[x][y]`.
    pub action_counts: Vec<Vec<usize>>,
    /// `transition_counts[y][x]`: observed transitions out of `x` under `y`.
    pub transition_counts: Vec<Vec<usize>>,
}

pub fn estimate_ccp_and_transitions(
    panel: &PanelData,
    n_states: usize,
    n_actions: usize,
) -> Result<FrequencyEstimates> {
    if panel.is_empty() {
        return Err(MtaError::Empty("panel has no records".into()));
    }
    let mut action_counts = vec![vec![0usize; n_actions]; n_states];
    let mut moves = vec![vec![0usize; n_states * n_states]; n_actions];
    for (k, r) in panel.records.iter().enumerate() {
        if r.state >= n_states || r.action >= n_actions {
            return Err(MtaError::validation(
                "panel",
                format!("record {k} has state {} / action {} out of range", r.state, r.action),
            ));
        }
        action_counts[r.state][r.action] += 1;
        if let Some(next) = panel.records.get(k + 1) {
            if next.agent == r.agent && next.period == r.period + 1 {
                moves[r.action][r.state * n_states + next.state] += 1;
            }
        }
    }
    let visits = action_counts.iter().map(|c| c.iter().sum()).collect();
    let ccps = action_counts.iter().map(|c| CcpVector::from_counts(c)).collect();
    let mut transition_counts = vec![vec![0usize; n_states]; n_actions];
    let transitions = moves
        .iter()
        .enumerate()
        .map(|(y, counts)| {
            let mut data = vec![0.0; n_states * n_states];
            for x in 0..n_states {
                let row = &counts[x * n_states..(x + 1) * n_states];
                let total: usize = row.iter().sum();
                transition_counts[y][x] = total;
                if total > 0 {
                    for (k, c) in row.iter().enumerate() {
                        data[x * n_states + k] = *c as f64 / total as f64;
                    }
                }
            }
            TransitionMatrix::new(n_states, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyEstimates {
        ccps,
        transitions,
        visits,
        action_counts,
        transition_counts,
    })
}

/// RMSE and R^2 of estimated flows, per non-benchmark action.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitMetrics {
    pub actions: Vec<usize>,
    pub rmse: Vec<f64>,
    pub r2: Vec<f64>,
    pub states_used: Vec<usize>,
}

impl FitMetrics {
    pub fn rmse_of(&self, y: usize) -> Option<f64> {
        self.actions.iter().position(|a| *a == y).map(|k| self.rmse[k])
    }

    pub fn r2_of(&self, y: usize) -> Option<f64> {
        self.actions.iter().position(|a| *a == y).map(|k| self.r2[k])
    }
}

pub fn fit_metrics(
    estimated: &[Vec<f64>],
    truth: &[Vec<f64>],
    states: &[usize],
    benchmark: usize,
) -> Result<FitMetrics> {
    if estimated.len() != truth.len() {
        return Err(MtaError::DimensionMismatch {
            what: "actions in estimated vs true flows",
            expected: truth.len(),
            got: estimated.len(),
        });
    }
    if states.is_empty() {
        return Err(MtaError::Empty("no identified states to score".into()));
    }
    let mut out = FitMetrics {
        actions: Vec::new(),
        rmse: Vec::new(),
        r2: Vec::new(),
        states_used: states.to_vec(),
    };
    for y in (0..truth.len()).filter(|&y| y != benchmark) {
        let (est, tru) = (&estimated[y], &truth[y]);
        if let Some(&x) = states.iter().find(|&&x| x >= est.len() || x >= tru.len() || !est[x].is_finite()) {
            return Err(MtaError::validation(
                "states",
                format!("state {x} has no estimate for action {y}"),
            ));
        }
        let n = states.len() as f64;
        let ss_res: f64 = states.iter().map(|&x| (est[x] - tru[x]).powi(2)).sum();
        let mean = states.iter().map(|&x| tru[x]).sum::<f64>() / n;
        let ss_tot: f64 = states.iter().map(|&x| (tru[x] - mean).powi(2)).sum();
        let r2 = if ss_tot > 0.0 {
            1.0 - ss_res / ss_tot
        } else if ss_res == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        };
        out.actions.push(y);
        out.rmse.push((ss_res / n).sqrt());
        out.r2.push(r2);
    }
    Ok(out)
}

/// Finite-sample experiment on the resource model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloDesign {
    pub model: ResourceModelSpec,
    pub n_agents: usize,
    pub n_periods: usize,
    pub replications: usize,
    /// Support points used to solve the true model.
    pub truth_points: usize,
    /// Support points used by the estimator.
    pub estimation_points: usize,
}

impl Default for MonteCarloDesign {
    fn default() -> Self {
        Self {
            model: ResourceModelSpec::default(),
            n_agents: 1000,
            n_periods: 1000,
            replications: 20,
            truth_points: 5000,
            estimation_points: 5000,
        }
    }
}

/// Result of one replication.
#[derive(Clone, Debug)]
pub struct Replication {
    pub index: usize,
    pub metrics: FitMetrics,
    pub estimate: EstimationResult,
}

/// Mean and standard deviation of each metric across replications.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub actions: Vec<usize>,
    pub mean_rmse: Vec<f64>,
    pub std_rmse: Vec<f64>,
    pub mean_r2: Vec<f64>,
    pub std_r2: Vec<f64>,
    pub replications: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn summarize(reps: &[Replication]) -> Result<MonteCarloSummary> {
    let first = reps.first().ok_or_else(|| MtaError::Empty("no replications".into()))?;
    let actions = first.metrics.actions.clone();
    let mut s = MonteCarloSummary {
        actions: actions.clone(),
        mean_rmse: Vec::new(),
        std_rmse: Vec::new(),
        mean_r2: Vec::new(),
        std_r2: Vec::new(),
        replications: reps.len(),
    };
    for k in 0..actions.len() {
        let rmse: Vec<f64> = reps.iter().map(|r| r.metrics.rmse[k]).collect();
        let r2: Vec<f64> = reps.iter().map(|r| r.metrics.r2[k]).collect();
        let (m, sd) = mean_std(&rmse);
        s.mean_rmse.push(m);
        s.std_rmse.push(sd);
        let (m, sd) = mean_std(&r2);
        s.mean_r2.push(m);
        s.std_r2.push(sd);
    }
    Ok(s)
}

/// Runs the experiment. Streams from `seed`: 0 for the true model's shocks,
/// 1 for panels and 2 for the estimator's shocks, each split by replication.
pub fn run_monte_carlo(design: &MonteCarloDesign, seed: u64) -> Result<Vec<Replication>> {
    if design.replications == 0 {
        return Err(MtaError::validation("montecarlo.replications", "must be positive"));
    }
    let model = build_resource_model(&design.model)?;
    let nx = model.n_states();
    let truth_shocks = StateShocks::discretize(&model.shocks, nx, design.truth_points, derive_seed(seed, 0))?;
    let solution = solve_model(&model, &truth_shocks, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let truth = design.model.true_flows();
    let panel_root = derive_seed(seed, 1);
    let shock_root = derive_seed(seed, 2);
    let options = EstimationOptions {
        policy: UnusableStatePolicy::Exclude,
        ..EstimationOptions::default()
    };
    (0..design.replications)
        .into_par_iter()
        .map(|index| {
            let panel = simulate_panel(
                &solution,
                &model,
                design.n_agents,
                design.n_periods,
                derive_seed(panel_root, index as u64),
            )?;
            let freq = estimate_ccp_and_transitions(&panel, nx, model.n_actions())?;
            let shocks = StateShocks::discretize(
                &model.shocks,
                nx,
                design.estimation_points,
                derive_seed(shock_root, index as u64),
            )?;
            let estimate = estimate(
                &freq.ccps,
                &freq.transitions,
                model.beta,
                &shocks,
                model.benchmark,
                &options,
            )?;
            let metrics = fit_metrics(&estimate.flows, &truth, &estimate.identified_states(), model.benchmark)?;
            Ok(Replication {
                index,
                metrics,
                estimate,
            })
        })
        .collect()
}

/// Interior grid `{(i, j, k) / m : i, j, k >= 1, i + j + k = m}` of the 3-simplex.
pub fn simplex_grid(m: usize) -> Vec<CcpVector> {
    let mut out = Vec::new();
    for i in 1..m {
        for j in 1..m - i {
            let k = m - i - j;
            let p = [i, j, k].map(|v| v as f64 / m as f64);
            let last = 1.0 - p[0] - p[1];
            out.push(CcpVector::new(vec![p[0], p[1], last]).expect("grid point on the simplex"));
        }
    }
    out
}

/// Width of the identified set at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: Vec<f64>,
    pub n_points: usize,
    pub seed: u64,
    pub widths: Vec<f64>,
}

impl SweepRow {
    pub fn max_width(&self) -> f64 {
        self.widths.iter().copied().fold(0.0, f64::max)
    }
}

/// Identified-set widths for every `(p, S, seed)` combination.
pub fn shrinkage_sweep(
    grid: &[CcpVector],
    sizes: &[usize],
    seeds: &[u64],
    spec: &ShockSpec,
) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let blocks = jobs
        .par_iter()
        .map(|&(n_points, seed)| {
            let shocks = discretize(spec, n_points, seed)?;
            grid.iter()
                .map(|p| {
                    let inv = invert_ccp(p, &shocks)?;
                    let b = identified_set_bounds(p, &shocks, &inv.solution)?;
                    Ok(SweepRow {
                        p: p.probs().to_vec(),
                        n_points,
                        seed,
                        widths: b.width,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

/// Columns `p1..p{|Y|},S,seed,width_y0..`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let ny = rows.first().map_or(0, |r| r.p.len());
    let mut header: Vec<String> = (1..=ny).map(|k| format!("p{k}")).collect();
    header.push("S".into());
    header.push("seed".into());
    header.extend((0..ny).map(|y| format!("width_y{y}")));
    out.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.p.iter().map(|v| format!("{v:.12}")).collect();
        rec.push(r.n_points.to_string());
        rec.push(r.seed.to_string());
        rec.extend(r.widths.iter().map(|v| format!("{v:.6e}")));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
