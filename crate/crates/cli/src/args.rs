//! Command-line definitions. Every numeric flag is optional so that a config
//! file value or the built-in default can fill it in.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "qpopf",
    version,
    about = "Probabilistic OPF through critical regions and a noisy quantum region classifier",
    long_about = "Offline: linearize a feeder case into a parametric LP, enumerate its critical \
regions, train a region classifier. Online: release regions through a temperature softmax, \
audit the release for differential privacy, and evaluate dispatch error, cost gap and \
infeasibility.\n\nSettings are resolved as: command-line flag, then the --config TOML file, \
then the built-in default. Outputs go to --out-dir, else $QPOPF_OUT_DIR, else ./qpopf-out.\n\n\
Exit codes: 0 success, 1 runtime failure, 2 usage error."
)]
pub struct Cli {
    /// TOML file with default settings (keys are flag names with underscores).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for outputs written under default names.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Linearize a case and enumerate its critical regions into an atlas.
    Regions(RegionsArgs),
    /// Train a region classifier on points labeled by the atlas.
    Train(TrainArgs),
    /// Audit a trained classifier's release distribution for differential privacy.
    Audit(AuditArgs),
    /// Monte-Carlo evaluation of dispatch error, cost gap and infeasibility.
    Eval(EvalArgs),
    /// Evaluate a circuit classifier over a (gamma, beta) grid; writes a heatmap CSV.
    Sweep(SweepArgs),
    /// Qubit budget of direct binary encodings and the circuit latency model.
    Budget(BudgetArgs),
    /// Collect the outputs in the output directory into one summary document.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Vqc,
    Mlp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vqc => "vqc",
            ModelKind::Mlp => "mlp",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LencMode {
    /// Closed-form encoding constant (a certified bound).
    Analytic,
    /// Largest trace-distance ratio observed on the audit pairs (an estimate, not a bound).
    Empirical,
}

#[derive(Debug, Args)]
pub struct CaseArgs {
    /// Case file, or a shipped case name (case69, toy2).
    #[arg(long)]
    pub case: Option<String>,
}

#[derive(Debug, Args)]
pub struct RegionsArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Number of parameter samples solved during enumeration.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Independent uniform samples for the coverage estimate.
    #[arg(long)]
    pub validation_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Atlas output path (default: <out-dir>/atlas.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Atlas produced by `regions` (default: <out-dir>/atlas.json).
    #[arg(long)]
    pub atlas: Option<PathBuf>,
    /// Classifier family.
    #[arg(long, value_enum)]
    pub kind: Option<ModelKind>,
    /// Labeled points drawn uniformly from the parameter box.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Fraction of the points used for training; the rest is held out.
    #[arg(long)]
    pub train_frac: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Inverse temperature of the softmax in the training loss.
    #[arg(long)]
    pub train_beta: Option<f64>,
    /// Learning-rate schedule: cosine or constant.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Radians per normalized parameter unit in the encoding rotations.
    #[arg(long)]
    pub encoding_scale: Option<f64>,
    /// Give the circuit's linear head a bias (breaks the noise-margin scaling).
    #[arg(long)]
    pub head_bias: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint path (default: <out-dir>/model-<kind>.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Checkpoint from `train` (default: <out-dir>/model-vqc.json).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Depolarizing level (circuit only).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Inverse temperature of the release softmax.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Logit noise standard deviation (MLP only).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Adjacency radius in normalized parameter units.
    #[arg(long)]
    pub delta_theta: Option<f64>,
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Monte-Carlo noise draws per MLP output distribution.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long, value_enum)]
    pub lenc: Option<LencMode>,
    /// Calibrate beta (circuit) or sigma (MLP) so that eps95 meets this target.
    #[arg(long)]
    pub calibrate_eps: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path (default: <out-dir>/audit-<kind>.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long)]
    pub atlas: Option<PathBuf>,
    /// Checkpoint to evaluate (default: <out-dir>/model-vqc.json).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Evaluate the exact point-location oracle instead of a model.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub scenarios: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also time the online paths against the local LP solver (needs an MLP checkpoint).
    #[arg(long)]
    pub speedup_mlp: Option<PathBuf>,
    /// Metrics path (default: <out-dir>/metrics-<kind>.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long)]
    pub atlas: Option<PathBuf>,
    /// Circuit checkpoint (default: <out-dir>/model-vqc.json).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    /// Comma-separated inverse temperatures.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    pub scenarios: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Heatmap CSV path (default: <out-dir>/sweep.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Continuous variables of the direct encoding.
    #[arg(long)]
    pub n_vars: Option<usize>,
    /// Inequality constraints needing slack registers.
    #[arg(long)]
    pub n_cons: Option<usize>,
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Budget CSV path (default: <out-dir>/budget.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Summary path (default: <out-dir>/report.md).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
