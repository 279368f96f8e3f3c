//! Machine-readable report written by `tikmeans cluster`.

use serde::{Deserialize, Serialize};
use tikmeans::clustering::{AssignRule, LambdaMode, StepType};
use tikmeans::metrics::ConfusionMatrix;
use tikmeans::LambdaState;

use crate::args::ScaleArg;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ConfigEcho,
    pub model: ModelSummary,
    /// Cluster means mapped back through the inverse transform, the scaling
    /// and the shift, in the units of the input file.
    pub centers: Vec<Vec<f64>>,
    /// Cluster means in the transformed space the fit worked in.
    pub centers_transformed: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// Every setting the fit used, defaults included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEcho {
    pub input: String,
    pub feature_names: Vec<String>,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub lambda_mode: LambdaMode,
    pub grid: Vec<f64>,
    pub step_type: StepType,
    pub warmup_step: Option<StepType>,
    pub assign_rule: AssignRule,
    pub n_starts: usize,
    pub warm_starts: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub scale: ScaleArg,
    pub scale_factors: Option<Vec<f64>>,
    pub shift_positive: bool,
    pub shift_offsets: Option<Vec<f64>>,
    pub label_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSummary {
    /// Cluster of every record, 1-based.
    pub labels: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    pub lambda: LambdaState,
    pub objective: Option<f64>,
    pub wss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cycle_detected: bool,
    pub degenerate: bool,
    pub start_index: usize,
    pub start_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evaluation {
    pub ari: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub elapsed_ms: f64,
    pub threads: usize,
}
