//! Run configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use mta_core::dataio::{BootstrapConfig, BusEstimationConfig};
use mta_core::ddc::{UnusableStatePolicy, DEFAULT_MAX_ITER, DEFAULT_TOL};
use mta_core::montecarlo::{MonteCarloDesign, ResourceModelSpec};
use mta_core::{derive_seed, ShockSpec};

use crate::error::CliError;

/// Seed streams derived from the master seed.
pub const STREAM_SHOCKS: u64 = 0;
pub const STREAM_MONTECARLO: u64 = 1;
pub const STREAM_SWEEP: u64 = 2;
pub const STREAM_BOOTSTRAP: u64 = 3;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub shocks: Option<ShockSpec>,
    pub discretization: Discretization,
    pub invert: InvertSection,
    pub model: ModelSection,
    pub estimation: EstimationSection,
    pub montecarlo: MonteCarloDesign,
    pub sweep: SweepSection,
    pub bootstrap: BootstrapConfig,
    pub bus: BusEstimationConfig,
    pub io: IoSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Discretization {
    pub n_points: usize,
    /// Overrides the seed derived from the master seed.
    pub seed: Option<u64>,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            n_points: 1000,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvertSection {
    /// Inline probability vectors, one per case.
    pub p: Vec<Vec<f64>>,
    /// CSV with one probability vector per row, after a header line.
    pub p_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Estimate from the files named in `[io]`.
    #[default]
    Data,
    /// Feed the built-in resource model's own choice probabilities to the estimator.
    Resource,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub resource: ResourceModelSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationSection {
    pub beta: f64,
    pub benchmark: usize,
    pub bounds: bool,
    pub policy: UnusableStatePolicy,
    /// Number of states; inferred from the data when absent.
    pub n_states: Option<usize>,
    /// Value-iteration tolerance when solving the resource model.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EstimationSection {
    fn default() -> Self {
        Self {
            beta: 0.9,
            benchmark: 0,
            bounds: false,
            policy: UnusableStatePolicy::Error,
            n_states: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Grid denominator; the interior grid of the 3-simplex with this denominator.
    pub grid: usize,
    pub sizes: Vec<usize>,
    pub seeds: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            grid: 7,
            sizes: vec![100, 300, 1000],
            seeds: 10,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    /// Panel CSV `agent,period,state,action`.
    pub panel: Option<PathBuf>,
    /// CCP CSV `x,p_0,..`.
    pub ccps: Option<PathBuf>,
    /// Transition CSV `y,x,next,prob`.
    pub transitions: Option<PathBuf>,
    /// Bus CSV `bus_id,t,mileage,replace`.
    pub bus_data: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// A parsed configuration together with the digest of its bytes.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::input("io", format!("cannot read config {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| CliError::input("config", "config file is not UTF-8"))?;
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::input("config", e.to_string().trim_end().to_string()))?;
        let sha256 = Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self {
            config,
            sha256,
            base_dir,
        })
    }

    /// Resolves a path from the config relative to the config file's directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn shock_seed(&self) -> u64 {
        self.config
            .discretization
            .seed
            .unwrap_or_else(|| derive_seed(self.config.seed, STREAM_SHOCKS))
    }

    pub fn stream(&self, stream: u64) -> u64 {
        derive_seed(self.config.seed, stream)
    }

    pub fn shocks(&self) -> Result<&ShockSpec, CliError> {
        self.config
            .shocks
            .as_ref()
            .ok_or_else(|| CliError::input("config", "missing [shocks] section"))
    }
}
