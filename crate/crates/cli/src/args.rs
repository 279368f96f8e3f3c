use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tikmeans::clustering::{AssignRule, LambdaMode, StepType};

#[derive(Debug, Parser)]
#[command(name = "tikmeans", version, about = "Transformation-infused K-means clustering")]
pub struct Cli {
    /// Worker threads for multistart fits (results do not depend on it).
    #[arg(long, global = true, env = "TIKMEANS_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a clustering and write a report.
    Cluster(ClusterArgs),
    /// Choose K with the jump statistic.
    SelectK(SelectKArgs),
    /// Draw a skewed synthetic dataset.
    Simulate(SimulateArgs),
    /// Apply the IHS transform (or its inverse) column by column.
    Transform(TransformArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    None,
    Shared,
    PerCluster,
}

impl From<ModeArg> for LambdaMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::None => LambdaMode::None,
            ModeArg::Shared => LambdaMode::Shared,
            ModeArg::PerCluster => LambdaMode::PerCluster,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepArg {
    OneStep,
    PerDimension,
    PerDimensionPerCluster,
}

impl From<StepArg> for StepType {
    fn from(s: StepArg) -> Self {
        match s {
            StepArg::OneStep => StepType::OneStep,
            StepArg::PerDimension => StepType::PerDimension,
            StepArg::PerDimensionPerCluster => StepType::PerDimensionPerCluster,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WarmupArg {
    Off,
    PerDimension,
    PerDimensionPerCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssignArg {
    Likelihood,
    Distance,
}

impl From<AssignArg> for AssignRule {
    fn from(a: AssignArg) -> Self {
        match a {
            AssignArg::Likelihood => AssignRule::Likelihood,
            AssignArg::Distance => AssignRule::Distance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleArg {
    None,
    Rms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

/// Input file and preprocessing shared by the data commands.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,

    /// Column holding reference labels; excluded from the features.
    #[arg(long = "labels")]
    pub labels: Option<String>,

    #[arg(long, value_enum, default_value_t = ScaleArg::None)]
    pub scale: ScaleArg,

    /// Shift columns with non-positive values so every value is positive.
    #[arg(long)]
    pub shift_positive: bool,
}

/// Fitting options shared by `cluster` and `select-k`.
#[derive(Debug, Args)]
pub struct EngineArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Shared)]
    pub lambda_mode: ModeArg,

    /// Grid spec, e.g. `default` or `0,0.05..2;3,5`.
    #[arg(long, default_value = "default")]
    pub grid: String,

    #[arg(long, value_enum, default_value_t = StepArg::OneStep)]
    pub step_type: StepArg,

    /// Step type used before the final one-step phase of every start
    /// [default: per-dimension, per-dimension-per-cluster in per-cluster mode].
    #[arg(long, value_enum)]
    pub warmup_step: Option<WarmupArg>,

    #[arg(long, value_enum, default_value_t = AssignArg::Likelihood)]
    pub assign_rule: AssignArg,

    /// Random starts [default: 100, 20 in per-cluster mode].
    #[arg(long)]
    pub starts: Option<usize>,

    /// Shared-mode starts used to build the per-cluster warm start.
    #[arg(long, default_value_t = 100)]
    pub warm_starts: usize,

    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long)]
    pub k: usize,

    #[command(flatten)]
    pub engine: EngineArgs,

    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,

    /// Leave timing out of the report.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct SelectKArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Largest K to fit.
    #[arg(long, conflicts_with = "k_true_hint")]
    pub kmax: Option<usize>,

    /// Expected K; sets K_max to min(2 * hint + 1, 20).
    #[arg(long)]
    pub k_true_hint: Option<usize>,

    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub eta_min: f64,

    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub eta_max: f64,

    /// Exponents per side of zero.
    #[arg(long, default_value_t = 200)]
    pub eta_count: usize,

    /// Exponents with magnitude below this are skipped.
    #[arg(long, default_value_t = 0.05)]
    pub eta_gap: f64,

    #[command(flatten)]
    pub engine: EngineArgs,

    /// Write the eta,chosen_k table here.
    #[arg(long)]
    pub csv: Option<PathBuf>,

    /// Write the jump selection plot here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Named generator; explicit flags override its fields.
    #[arg(long)]
    pub preset: Option<String>,

    /// Records per cluster, e.g. `100,100`.
    #[arg(long, value_delimiter = ',')]
    pub n_per_cluster: Option<Vec<usize>>,

    /// Latent means, clusters separated by `;`, e.g. `2,-1;2,2`.
    #[arg(long, allow_hyphen_values = true)]
    pub means: Option<String>,

    #[arg(long)]
    pub sd: Option<f64>,

    /// Transformation parameters of the observed data, e.g. `1.4,0.9`.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub input: PathBuf,

    /// One parameter per feature column.
    #[arg(long, value_delimiter = ',', conflicts_with = "from_report", required_unless_present = "from_report")]
    pub lambda: Option<Vec<f64>>,

    /// Take parameters (and, for per-cluster fits, labels) from a `cluster` report.
    #[arg(long)]
    pub from_report: Option<PathBuf>,

    #[arg(long)]
    pub inverse: bool,

    /// Column passed through untouched.
    #[arg(long = "labels")]
    pub labels: Option<String>,

    #[arg(long)]
    pub output: Option<PathBuf>,
}
