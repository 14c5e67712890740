//! Settings resolution: command-line flag, then config file, then default.

use crate::args::{LencMode, ModelKind};
use crate::CliError;
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QPOPF_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "qpopf-out";

/// Keys accepted in the `--config` TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub case: Option<String>,
    pub atlas: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub kind: Option<ModelKind>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub validation_samples: Option<usize>,
    pub samples: Option<usize>,
    pub train_frac: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub train_beta: Option<f64>,
    pub schedule: Option<String>,
    pub qubits: Option<usize>,
    pub layers: Option<usize>,
    pub encoding_scale: Option<f64>,
    pub head_bias: Option<bool>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub delta_theta: Option<f64>,
    pub pairs: Option<usize>,
    pub draws: Option<usize>,
    pub lenc: Option<LencMode>,
    pub calibrate_eps: Option<f64>,
    pub scenarios: Option<usize>,
    pub gammas: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub n_vars: Option<usize>,
    pub n_cons: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config file {}: {e}", path.display())))
    }
}

/// First present value of flag and file, else the default.
pub fn pick<T: Clone>(flag: Option<T>, file: &Option<T>, default: T) -> T {
    flag.or_else(|| file.clone()).unwrap_or(default)
}

/// Output directory: flag, config file, environment, then `./qpopf-out`.
pub fn out_dir(flag: Option<PathBuf>, file: &FileConfig) -> PathBuf {
    flag.or_else(|| file.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn check_range(name: &str, v: f64, ok: bool) -> Result<f64, CliError> {
    if ok && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} = {v} is out of range")))
    }
}

pub fn gamma(v: f64) -> Result<f64, CliError> {
    check_range("gamma", v, (0.0..=1.0).contains(&v))
}

pub fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    check_range(name, v, v > 0.0)
}

pub fn nonnegative(name: &str, v: f64) -> Result<f64, CliError> {
    check_range(name, v, v >= 0.0)
}

pub fn at_least_one(name: &str, v: usize) -> Result<usize, CliError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must be at least 1")))
    }
}
