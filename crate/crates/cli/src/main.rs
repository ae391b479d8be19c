mod commands;
mod config;
mod error;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::LoadedConfig;
use error::CliError;

/// Mass transport estimation of dynamic discrete choice models.
#[derive(Parser)]
#[command(name = "mta", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory; overrides `io.out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Also report identified-set bounds.
    #[arg(long, global = true)]
    bounds: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Invert choice probabilities into normalised payoffs.
    Invert,
    /// Two-step estimation of flow utilities.
    Estimate,
    /// Monte Carlo experiment on the resource model.
    Montecarlo,
    /// Identified-set widths over a grid of choice probabilities.
    Sweep,
    /// Bus engine estimation with a bootstrap over buses.
    Bootstrap,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::input("arguments", "--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::input("arguments", e.to_string()))?;
    }
    let path = cli
        .config
        .ok_or_else(|| CliError::input("arguments", "--config is required"))?;
    let config = LoadedConfig::load(&path)?;
    let out_dir = match (cli.out, &config.config.io.out_dir) {
        (Some(dir), _) => dir,
        (None, Some(dir)) => config.resolve(dir),
        (None, None) => PathBuf::from("."),
    };
    let ctx = Context {
        config,
        out_dir,
        bounds: cli.bounds,
    };
    match cli.command {
        Command::Invert => commands::invert(&ctx),
        Command::Estimate => commands::estimate_cmd(&ctx),
        Command::Montecarlo => commands::montecarlo(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Bootstrap => commands::bootstrap(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
