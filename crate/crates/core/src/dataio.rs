//! Bus engine replacement data: CSV ingestion, mileage bins, the two-action transition
//! template, point estimation and bus-level bootstrap.
//!
//! Input contract: a CSV file with header `bus_id,t,mileage,replace`, one row per bus
//! and period. `mileage` is the mileage accumulated since the last engine replacement at
//! the start of period `t`; a replacement at `t` is reflected in the mileage of `t + 1`.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddc::{
    estimate, DdcModel, EstimationOptions, EstimationResult, TransitionMatrix, UnusableStatePolicy,
};
use crate::error::{MtaError, Result};
use crate::montecarlo::{estimate_ccp_and_transitions, PanelData, PanelRecord};
use crate::shocks::{derive_seed, rng_from_seed, ShockSpec, StateShocks};

/// Width of a mileage bin in miles.
pub const BIN_WIDTH: f64 = 12_500.0;
/// Number of mileage states; the last one collects everything above.
pub const N_BUS_STATES: usize = 30;
/// Keep the current engine.
pub const KEEP: usize = 0;
/// Replace the engine.
pub const REPLACE: usize = 1;

/// One row of the input file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawBusRecord {
    pub bus_id: u64,
    pub t: u64,
    pub mileage: f64,
    pub replace: bool,
}

const COLUMNS: [&str; 4] = ["bus_id", "t", "mileage", "replace"];

pub fn ingest_bus_csv(path: impl AsRef<Path>) -> Result<Vec<RawBusRecord>> {
    read_bus_csv(std::fs::File::open(path)?)
}

/// Parses bus records, collecting every malformed row (with its file line) before failing.
pub fn read_bus_csv<R: Read>(reader: R) -> Result<Vec<RawBusRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [0usize; 4];
    for (k, name) in COLUMNS.iter().enumerate() {
        index[k] = headers.iter().position(|h| h == *name).ok_or_else(|| {
            MtaError::validation("header", format!("missing column `{name}`"))
        })?;
    }
    let mut records = Vec::new();
    let mut bad = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |k: usize| row.get(index[k]).unwrap_or("");
        let parsed = (|| -> std::result::Result<RawBusRecord, String> {
            let bus_id = field(0)
                .parse::<u64>()
                .map_err(|_| format!("bus_id `{}` is not a nonnegative integer", field(0)))?;
            let t = field(1)
                .parse::<u64>()
                .map_err(|_| format!("t `{}` is not a nonnegative integer", field(1)))?;
            let mileage = field(2)
                .parse::<f64>()
                .map_err(|_| format!("mileage `{}` is not a number", field(2)))?;
            if !mileage.is_finite() || mileage < 0.0 {
                return Err(format!("mileage {mileage} must be finite and nonnegative"));
            }
            let replace = match field(3) {
                "0" => false,
                "1" => true,
                other => return Err(format!("replace `{other}` must be 0 or 1")),
            };
            if !seen.insert((bus_id, t)) {
                return Err(format!("duplicate record for bus {bus_id} at t = {t}"));
            }
            Ok(RawBusRecord {
                bus_id,
                t,
                mileage,
                replace,
            })
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(reason) => bad.push((line, reason)),
        }
    }
    if !bad.is_empty() {
        return Err(MtaError::MalformedRows(bad));
    }
    if records.is_empty() {
        return Err(MtaError::Empty("bus file has no records".into()));
    }
    Ok(records)
}

/// `min(floor(mileage / 12500), 29)`.
pub fn mileage_state(mileage: f64) -> usize {
    ((mileage / BIN_WIDTH).floor() as usize).min(N_BUS_STATES - 1)
}

/// Panel on the 30 mileage states, with the original bus id of each agent.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedPanel {
    pub panel: PanelData,
    pub bus_ids: Vec<u64>,
}

impl DiscretizedPanel {
    pub fn n_buses(&self) -> usize {
        self.bus_ids.len()
    }

    /// Replacements observed at each state.
    pub fn replacements_per_state(&self) -> Vec<usize> {
        let mut out = vec![0; N_BUS_STATES];
        for r in &self.panel.records {
            if r.action == REPLACE {
                out[r.state] += 1;
            }
        }
        out
    }
}

/// Bins mileage into states. Periods count from the smallest `t` in the file, so gaps
/// in `t` are kept.
pub fn discretize_mileage(records: &[RawBusRecord]) -> DiscretizedPanel {
    let t0 = records.iter().map(|r| r.t).min().unwrap_or(0);
    let mut bus_ids: Vec<u64> = records.iter().map(|r| r.bus_id).collect();
    bus_ids.sort_unstable();
    bus_ids.dedup();
    let panel = PanelData::new(
        records
            .iter()
            .map(|r| PanelRecord {
                agent: bus_ids.binary_search(&r.bus_id).expect("id collected above"),
                period: (r.t - t0) as usize,
                state: mileage_state(r.mileage),
                action: if r.replace { REPLACE } else { KEEP },
            })
            .collect(),
    );
    DiscretizedPanel { panel, bus_ids }
}

/// Records with the bin midpoint as mileage; inverse of [`discretize_mileage`] on states.
pub fn panel_to_bus_records(panel: &PanelData) -> Vec<RawBusRecord> {
    panel
        .records
        .iter()
        .map(|r| RawBusRecord {
            bus_id: r.agent as u64 + 1,
            t: r.period as u64 + 1,
            mileage: (r.state as f64 + 0.5) * BIN_WIDTH,
            replace: r.action == REPLACE,
        })
        .collect()
}

pub fn write_bus_csv<W: Write>(records: &[RawBusRecord], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(COLUMNS)?;
    for r in records {
        out.write_record([
            r.bus_id.to_string(),
            r.t.to_string(),
            format!("{}", r.mileage),
            u8::from(r.replace).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn check_theta(theta: f64, field: &str) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(MtaError::validation(field, format!("must lie in (0, 1), got {theta}")));
    }
    Ok(())
}

/// Keep: stay with probability `theta`, advance one bin otherwise (the last bin absorbs).
/// Replace: bin 0 with probability `theta`, bin 1 otherwise.
pub fn bus_transition_template(theta: f64) -> Result<Vec<TransitionMatrix>> {
    bus_transition_template_split(theta, theta)
}

/// Template with separate stay probabilities for the two actions.
pub fn bus_transition_template_split(theta_keep: f64, theta_replace: f64) -> Result<Vec<TransitionMatrix>> {
    check_theta(theta_keep, "theta_keep")?;
    check_theta(theta_replace, "theta_replace")?;
    let n = N_BUS_STATES;
    let mut keep = vec![0.0; n * n];
    let mut replace = vec![0.0; n * n];
    for x in 0..n {
        if x + 1 < n {
            keep[x * n + x] = theta_keep;
            keep[x * n + x + 1] = 1.0 - theta_keep;
        } else {
            keep[x * n + x] = 1.0;
        }
        replace[x * n] = theta_replace;
        replace[x * n + 1] = 1.0 - theta_replace;
    }
    Ok(vec![TransitionMatrix::new(n, keep)?, TransitionMatrix::new(n, replace)?])
}

/// Zero-increment frequencies `(keep, replace)`: a keep transition that stays in its bin
/// (the top bin is skipped, it cannot advance) and a replace transition into bin 0.
pub fn estimate_thetas(panel: &PanelData) -> Result<(f64, f64)> {
    let mut keep = (0usize, 0usize);
    let mut replace = (0usize, 0usize);
    for pair in panel.records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.agent != b.agent || b.period != a.period + 1 {
            continue;
        }
        if a.action == REPLACE {
            replace.1 += 1;
            replace.0 += usize::from(b.state == 0);
        } else if a.state + 1 < N_BUS_STATES {
            keep.1 += 1;
            keep.0 += usize::from(b.state == a.state);
        }
    }
    if keep.1 == 0 {
        return Err(MtaError::Empty("no keep transitions to estimate theta".into()));
    }
    let theta_keep = keep.0 as f64 / keep.1 as f64;
    let theta_replace = if replace.1 > 0 {
        replace.0 as f64 / replace.1 as f64
    } else {
        theta_keep
    };
    Ok((theta_keep, theta_replace))
}

/// Pooled zero-increment frequency over both actions.
pub fn estimate_theta(panel: &PanelData) -> Result<f64> {
    let mut stays = 0usize;
    let mut total = 0usize;
    for pair in panel.records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.agent != b.agent || b.period != a.period + 1 {
            continue;
        }
        if a.action == REPLACE {
            total += 1;
            stays += usize::from(b.state == 0);
        } else if a.state + 1 < N_BUS_STATES {
            total += 1;
            stays += usize::from(b.state == a.state);
        }
    }
    if total == 0 {
        return Err(MtaError::Empty("no transitions to estimate theta".into()));
    }
    Ok(stays as f64 / total as f64)
}

/// Shock law of the bus application: the keep-minus-replace shock follows
/// `b N(0,1) + (1-b) N(0, 1/(1 + a x))`.
pub fn bus_shock_spec(a: f64, b: f64) -> ShockSpec {
    ShockSpec::StateDependentNormalMixture { a, b }
}

/// Two-action bus model with replacement as the zero-flow benchmark.
pub fn build_bus_model(theta: f64, keep_flows: Vec<f64>, a: f64, b: f64, beta: f64) -> Result<DdcModel> {
    if keep_flows.len() != N_BUS_STATES {
        return Err(MtaError::DimensionMismatch {
            what: "keep flows",
            expected: N_BUS_STATES,
            got: keep_flows.len(),
        });
    }
    DdcModel::new(
        beta,
        bus_transition_template(theta)?,
        vec![keep_flows, vec![0.0; N_BUS_STATES]],
        bus_shock_spec(a, b),
        REPLACE,
    )
}

/// Settings of the bus estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BusEstimationConfig {
    pub beta: f64,
    /// Support points per state.
    pub n_points: usize,
    pub mixture_a: f64,
    pub mixture_b: f64,
    pub benchmark: usize,
    /// Estimate separate stay probabilities for keep and replace.
    pub action_specific_theta: bool,
    pub policy: UnusableStatePolicy,
    pub with_bounds: bool,
}

impl Default for BusEstimationConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            n_points: 5000,
            mixture_a: 0.1,
            mixture_b: 0.5,
            benchmark: REPLACE,
            action_specific_theta: false,
            policy: UnusableStatePolicy::Exclude,
            with_bounds: false,
        }
    }
}

impl BusEstimationConfig {
    pub fn shocks(&self, seed: u64) -> Result<StateShocks> {
        StateShocks::discretize(
            &bus_shock_spec(self.mixture_a, self.mixture_b),
            N_BUS_STATES,
            self.n_points,
            seed,
        )
    }
}

/// Point estimate on a bus panel.
#[derive(Clone, Debug)]
pub struct BusEstimate {
    pub theta_keep: f64,
    pub theta_replace: f64,
    pub visits: Vec<usize>,
    pub replacements: Vec<usize>,
    pub estimate: EstimationResult,
}

/// CCPs by frequency, transitions from the template with estimated stay probabilities,
/// then the two-step estimator.
pub fn estimate_bus(panel: &DiscretizedPanel, config: &BusEstimationConfig, shocks: &StateShocks) -> Result<BusEstimate> {
    let (theta_keep, theta_replace) = if config.action_specific_theta {
        estimate_thetas(&panel.panel)?
    } else {
        let t = estimate_theta(&panel.panel)?;
        (t, t)
    };
    let transitions = bus_transition_template_split(theta_keep, theta_replace)?;
    let freq = estimate_ccp_and_transitions(&panel.panel, N_BUS_STATES, 2)?;
    let options = EstimationOptions {
        with_bounds: config.with_bounds,
        policy: config.policy,
        ..EstimationOptions::default()
    };
    let estimate = estimate(&freq.ccps, &transitions, config.beta, shocks, config.benchmark, &options)?;
    Ok(BusEstimate {
        theta_keep,
        theta_replace,
        visits: freq.visits,
        replacements: panel.replacements_per_state(),
        estimate,
    })
}

/// How bootstrap samples are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    /// Buses drawn uniformly with replacement.
    #[default]
    WithReplacement,
    /// Every resample is the full panel; reproduces the point estimate.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub replications: usize,
    /// Buses per resample; `None` uses the number of distinct buses.
    pub resample_size: Option<usize>,
    pub mode: ResampleMode,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 100,
            resample_size: None,
            mode: ResampleMode::WithReplacement,
        }
    }
}

/// Bus indices of resample `b`, drawn from `derive_seed(seed, b)`.
pub fn resample_indices(n_buses: usize, config: &BootstrapConfig, seed: u64, b: usize) -> Vec<usize> {
    match config.mode {
        ResampleMode::Identity => (0..n_buses).collect(),
        ResampleMode::WithReplacement => {
            let m = config.resample_size.unwrap_or(n_buses);
            let mut rng = rng_from_seed(derive_seed(seed, b as u64));
            (0..m).map(|_| rng.random_range(0..n_buses)).collect()
        }
    }
}

/// Panel built from the given buses; repeated buses become distinct agents.
pub fn resample_panel(panel: &DiscretizedPanel, buses: &[usize]) -> DiscretizedPanel {
    let n = panel.n_buses();
    let mut start = vec![0usize; n + 1];
    for r in &panel.panel.records {
        start[r.agent + 1] += 1;
    }
    for k in 0..n {
        start[k + 1] += start[k];
    }
    let mut records = Vec::new();
    for (agent, &bus) in buses.iter().enumerate() {
        records.extend(
            panel.panel.records[start[bus]..start[bus + 1]]
                .iter()
                .map(|r| PanelRecord { agent, ..*r }),
        );
    }
    DiscretizedPanel {
        panel: PanelData::new(records),
        bus_ids: buses.iter().map(|&b| panel.bus_ids[b]).collect(),
    }
}

/// Outcome of one resample; `None` when estimation failed on it.
#[derive(Clone, Debug)]
pub struct BootstrapDraw {
    pub index: usize,
    pub flows: Option<Vec<Vec<f64>>>,
    pub failure: Option<String>,
}

/// Five-number summaries of the bootstrap distribution per state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateQuantiles {
    pub x: usize,
    /// 5th, 25th, 50th, 75th and 95th percentiles; `NaN` when no resample identifies `x`.
    pub q: [f64; 5],
    pub n_replacements_observed: usize,
}

#[derive(Clone, Debug)]
pub struct BootstrapResult {
    pub draws: Vec<BootstrapDraw>,
    pub action: usize,
    pub quantiles: Vec<StateQuantiles>,
}

impl BootstrapResult {
    pub fn excluded(&self) -> usize {
        self.draws.iter().filter(|d| d.flows.is_none()).count()
    }

    /// Columns `x,q05,q25,q50,q75,q95,n_replacements_observed`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["x", "q05", "q25", "q50", "q75", "q95", "n_replacements_observed"])?;
        for q in &self.quantiles {
            let mut rec = vec![q.x.to_string()];
            rec.extend(q.q.iter().map(|v| if v.is_finite() { format!("{v:.10e}") } else { String::new() }));
            rec.push(q.n_replacements_observed.to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

const LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Re-estimates on bus-level resamples and summarises the flows of the first
/// non-benchmark action. Shocks are shared by all resamples.
pub fn bootstrap_estimate(
    panel: &DiscretizedPanel,
    boot: &BootstrapConfig,
    config: &BusEstimationConfig,
    shocks: &StateShocks,
    seed: u64,
) -> Result<BootstrapResult> {
    if boot.replications == 0 {
        return Err(MtaError::validation("bootstrap.replications", "must be at least 1"));
    }
    if boot.resample_size == Some(0) {
        return Err(MtaError::validation("bootstrap.resample_size", "must be positive"));
    }
    let action = (0..2).find(|&y| y != config.benchmark).unwrap_or(0);
    let draws: Vec<BootstrapDraw> = (0..boot.replications)
        .into_par_iter()
        .map(|b| {
            let buses = resample_indices(panel.n_buses(), boot, seed, b);
            let sample = resample_panel(panel, &buses);
            match estimate_bus(&sample, config, shocks) {
                Ok(est) => BootstrapDraw {
                    index: b,
                    flows: Some(est.estimate.flows),
                    failure: None,
                },
                Err(e) => BootstrapDraw {
                    index: b,
                    flows: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    let replacements = panel.replacements_per_state();
    let quantiles = (0..N_BUS_STATES)
        .map(|x| {
            let mut vals: Vec<f64> = draws
                .iter()
                .filter_map(|d| d.flows.as_ref().map(|f| f[action][x]))
                .filter(|v| v.is_finite())
                .collect();
            vals.sort_by(f64::total_cmp);
            StateQuantiles {
                x,
                q: LEVELS.map(|l| quantile_sorted(&vals, l)),
                n_replacements_observed: replacements[x],
            }
        })
        .collect();
    Ok(BootstrapResult {
        draws,
        action,
        quantiles,
    })
}
