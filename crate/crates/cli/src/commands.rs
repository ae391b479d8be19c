use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use mta_core::dataio::{bootstrap_estimate, discretize_mileage, estimate_bus, ingest_bus_csv};
use mta_core::ddc::{estimate, solve_model, EstimationOptions, EstimationResult, StateStatus};
use mta_core::montecarlo::{
    build_resource_model, estimate_ccp_and_transitions, run_monte_carlo, shrinkage_sweep, simplex_grid,
    summarize, write_sweep_csv, ResourceModelSpec,
};
use mta_core::{derive_seed, discretize, identified_set_bounds, invert_ccp, CcpVector, StateShocks};

use crate::config::{LoadedConfig, ModelKind, STREAM_BOOTSTRAP, STREAM_MONTECARLO, STREAM_SWEEP};
use crate::error::CliError;
use crate::input;

/// Shared command context.
pub struct Context {
    pub config: LoadedConfig,
    pub out_dir: PathBuf,
    pub bounds: bool,
}

impl Context {
    /// Writes `name` in the output directory, prefixed by the provenance comment line.
    fn write_csv<F>(&self, name: &str, body: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> mta_core::Result<()>,
    {
        let mut buf = format!(
            "# mta {} config_sha256={}\n",
            env!("CARGO_PKG_VERSION"),
            self.config.sha256
        )
        .into_bytes();
        body(&mut buf)?;
        std::fs::create_dir_all(&self.out_dir).map_err(|e| {
            CliError::input("io", format!("cannot create {}: {e}", self.out_dir.display()))
        })?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, buf)?;
        Ok(path)
    }

    fn input_path(&self, path: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        let path = path
            .as_ref()
            .ok_or_else(|| CliError::input("config", format!("missing {key}")))?;
        let resolved = self.config.resolve(path);
        if !resolved.exists() {
            return Err(CliError::input(
                "io",
                format!("{key}: {} does not exist", resolved.display()),
            ));
        }
        Ok(resolved)
    }
}

fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        String::new()
    }
}

fn written(path: &Path) {
    println!("wrote {}", path.display());
}

pub fn invert(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config.config;
    let spec = ctx.config.shocks()?;
    if spec.is_state_dependent() {
        return Err(CliError::input("config", "invert needs a state-independent shock law"));
    }
    let mut cases = cfg
        .invert
        .p
        .iter()
        .map(|p| CcpVector::new(p.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &cfg.invert.p_csv {
        let path = ctx.input_path(&Some(path.clone()), "invert.p_csv")?;
        cases.extend(input::read_probabilities(&path)?);
    }
    if cases.is_empty() {
        return Err(CliError::input("config", "no probability vectors in [invert]"));
    }
    let shocks = discretize(spec, cfg.discretization.n_points, ctx.config.shock_seed())?;
    let with_bounds = ctx.bounds;
    let results = cases
        .par_iter()
        .map(|p| {
            let inv = invert_ccp(p, &shocks)?;
            let b = if with_bounds {
                Some(identified_set_bounds(p, &shocks, &inv.solution)?)
            } else {
                None
            };
            Ok((inv, b))
        })
        .collect::<Vec<mta_core::Result<_>>>();
    let results = results.into_iter().collect::<mta_core::Result<Vec<_>>>()?;
    let path = ctx.write_csv("invert.csv", |buf| {
        let mut out = csv::Writer::from_writer(buf);
        let mut header = vec!["case", "y", "p", "w0", "gstar", "duality_gap"];
        if with_bounds {
            header.extend(["lower", "upper"]);
        }
        out.write_record(&header)?;
        for (case, (p, (inv, b))) in cases.iter().zip(&results).enumerate() {
            for y in 0..p.len() {
                let mut rec = vec![
                    case.to_string(),
                    y.to_string(),
                    format!("{:.12}", p[y]),
                    sci(inv.w0[y]),
                    sci(inv.gstar),
                    sci(inv.solution.duality_gap()),
                ];
                if let Some(b) = b {
                    rec.push(sci(b.lower[y]));
                    rec.push(sci(b.upper[y]));
                }
                out.write_record(&rec)?;
            }
        }
        out.flush()?;
        Ok(())
    })?;
    println!("inverted {} probability vectors with S = {}", cases.len(), shocks.n_points());
    written(&path);
    Ok(())
}

fn print_estimate_summary(result: &EstimationResult) {
    let count = |s: StateStatus| result.status.iter().filter(|v| **v == s).count();
    let identified = result.identified_states();
    println!(
        "states: {} identified, {} boundary, {} unobserved, {} pruned (of {})",
        identified.len(),
        count(StateStatus::BoundaryCcp),
        count(StateStatus::Unobserved),
        count(StateStatus::Pruned),
        result.n_states()
    );
    println!("identified states: {identified:?}");
    println!("linear system residual: {:.3e}", result.linear_residual);
}

pub fn estimate_cmd(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config.config;
    let est = &cfg.estimation;
    let options = EstimationOptions {
        with_bounds: est.bounds || ctx.bounds,
        policy: est.policy,
        ..EstimationOptions::default()
    };
    let n_points = cfg.discretization.n_points;
    let seed = ctx.config.shock_seed();
    let result = match cfg.model.kind {
        ModelKind::Resource => {
            let spec: &ResourceModelSpec = &cfg.model.resource;
            let model = build_resource_model(spec)?;
            let nx = model.n_states();
            let shocks = StateShocks::discretize(&model.shocks, nx, n_points, seed)?;
            let solution = solve_model(&model, &shocks, est.tol, est.max_iter)?;
            println!(
                "solved resource model in {} iterations (Bellman residual {:.3e})",
                solution.iterations, solution.bellman_residual
            );
            let ccps: Vec<Option<CcpVector>> = solution.ccp.iter().cloned().map(Some).collect();
            let result = estimate(&ccps, &model.transitions, model.beta, &shocks, model.benchmark, &options)?;
            let truth = spec.true_flows();
            let err = result
                .identified_states()
                .iter()
                .flat_map(|&x| (0..truth.len()).map(move |y| (y, x)))
                .map(|(y, x)| (result.flows[y][x] - truth[y][x]).abs())
                .fold(0.0, f64::max);
            println!("max abs flow error on identified states: {err:.3e}");
            result
        }
        ModelKind::Data => {
            let spec = ctx.config.shocks()?;
            let ny = spec.dimension();
            let (ccps, transitions) = if cfg.io.panel.is_some() {
                let panel = input::read_panel(&ctx.input_path(&cfg.io.panel, "io.panel")?)?;
                let nx = est
                    .n_states
                    .unwrap_or_else(|| panel.records.iter().map(|r| r.state + 1).max().unwrap_or(0));
                let freq = estimate_ccp_and_transitions(&panel, nx, ny)?;
                println!("panel: {} records, {} agents", panel.len(), panel.n_agents);
                (freq.ccps, freq.transitions)
            } else if cfg.io.ccps.is_some() {
                let ccps = input::read_ccps(&ctx.input_path(&cfg.io.ccps, "io.ccps")?, est.n_states)?;
                let path = ctx.input_path(&cfg.io.transitions, "io.transitions")?;
                let transitions = input::read_transitions(&path, ccps.len(), ny)?;
                (ccps, transitions)
            } else {
                return Err(CliError::input(
                    "config",
                    "estimate needs io.panel, io.ccps with io.transitions, or model.kind = \"resource\"",
                ));
            };
            let shocks = StateShocks::discretize(spec, ccps.len(), n_points, seed)?;
            estimate(&ccps, &transitions, est.beta, &shocks, est.benchmark, &options)?
        }
    };
    print_estimate_summary(&result);
    let path = ctx.write_csv("estimate.csv", |buf| result.write_csv(buf))?;
    written(&path);
    Ok(())
}

pub fn montecarlo(ctx: &Context) -> Result<(), CliError> {
    let design = &ctx.config.config.montecarlo;
    let reps = run_monte_carlo(design, ctx.config.stream(STREAM_MONTECARLO))?;
    let summary = summarize(&reps)?;
    let reps_path = ctx.write_csv("montecarlo_replications.csv", |buf| {
        let mut out = csv::Writer::from_writer(buf);
        out.write_record(["replication", "action", "rmse", "r2", "states_used"])?;
        for r in &reps {
            for (k, y) in r.metrics.actions.iter().enumerate() {
                out.write_record([
                    r.index.to_string(),
                    y.to_string(),
                    sci(r.metrics.rmse[k]),
                    sci(r.metrics.r2[k]),
                    r.metrics.states_used[k].to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    })?;
    let summary_path = ctx.write_csv("montecarlo_summary.csv", |buf| {
        let mut out = csv::Writer::from_writer(buf);
        out.write_record(["action", "mean_rmse", "std_rmse", "mean_r2", "std_r2", "replications"])?;
        for (k, y) in summary.actions.iter().enumerate() {
            out.write_record([
                y.to_string(),
                sci(summary.mean_rmse[k]),
                sci(summary.std_rmse[k]),
                sci(summary.mean_r2[k]),
                sci(summary.std_r2[k]),
                summary.replications.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    })?;
    println!(
        "N = {}, T = {}, {} replications",
        design.n_agents, design.n_periods, summary.replications
    );
    println!("{:>8} {:>20} {:>20}", "action", "RMSE", "R^2");
    for (k, y) in summary.actions.iter().enumerate() {
        println!(
            "{:>8} {:>9.4} ({:.4}) {:>11.4} ({:.4})",
            y, summary.mean_rmse[k], summary.std_rmse[k], summary.mean_r2[k], summary.std_r2[k]
        );
    }
    written(&reps_path);
    written(&summary_path);
    Ok(())
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config.config;
    let s = &cfg.sweep;
    if s.grid < 3 {
        return Err(CliError::input("config", "sweep.grid must be at least 3"));
    }
    if s.sizes.is_empty() || s.seeds == 0 {
        return Err(CliError::input("config", "sweep.sizes and sweep.seeds must be nonempty"));
    }
    let spec = match &cfg.shocks {
        Some(spec) => spec.clone(),
        None => cfg.model.resource.shock_spec(),
    };
    if spec.dimension() != 3 {
        return Err(CliError::input("config", "sweep needs three-dimensional shocks"));
    }
    let root = ctx.config.stream(STREAM_SWEEP);
    let seeds: Vec<u64> = (0..s.seeds as u64).map(|k| derive_seed(root, k)).collect();
    let grid = simplex_grid(s.grid);
    let rows = shrinkage_sweep(&grid, &s.sizes, &seeds, &spec)?;
    let path = ctx.write_csv("sweep.csv", |buf| write_sweep_csv(&rows, buf))?;
    println!("{:>8} {:>14} {:>12}", "S", "median width", "<= 0.01");
    for &n in &s.sizes {
        let mut widths: Vec<f64> = rows.iter().filter(|r| r.n_points == n).map(|r| r.max_width()).collect();
        widths.sort_by(f64::total_cmp);
        let share = widths.iter().filter(|w| **w <= 0.01).count() as f64 / widths.len() as f64;
        println!("{:>8} {:>14.3e} {:>11.1}%", n, widths[widths.len() / 2], 100.0 * share);
    }
    written(&path);
    Ok(())
}

pub fn bootstrap(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config.config;
    let path = ctx.input_path(&cfg.io.bus_data, "io.bus_data")?;
    let records = ingest_bus_csv(&path)?;
    let panel = discretize_mileage(&records);
    let mut bus = cfg.bus.clone();
    bus.with_bounds |= ctx.bounds;
    let shocks = bus.shocks(ctx.config.shock_seed())?;
    let point = estimate_bus(&panel, &bus, &shocks)?;
    let boot = bootstrap_estimate(&panel, &cfg.bootstrap, &bus, &shocks, ctx.config.stream(STREAM_BOOTSTRAP))?;
    println!(
        "{} buses, {} records; stay probability {:.4} (keep) / {:.4} (replace)",
        panel.n_buses(),
        panel.panel.len(),
        point.theta_keep,
        point.theta_replace
    );
    print_estimate_summary(&point.estimate);
    println!(
        "bootstrap: {} resamples, {} excluded",
        boot.draws.len(),
        boot.excluded()
    );
    let est_path = ctx.write_csv("bus_estimate.csv", |buf| point.estimate.write_csv(buf))?;
    let boot_path = ctx.write_csv("bootstrap.csv", |buf| boot.write_csv(buf))?;
    let mut stdout = std::io::stdout().lock();
    for d in boot.draws.iter().filter(|d| d.failure.is_some()) {
        writeln!(stdout, "resample {} excluded: {}", d.index, d.failure.as_deref().unwrap_or(""))?;
    }
    written(&est_path);
    written(&boot_path);
    Ok(())
}
