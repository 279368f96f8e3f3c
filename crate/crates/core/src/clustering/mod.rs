//! TiK-means engines and the Lloyd K-means baseline.
//!
//! Each start alternates three steps until neither the transformation
//! parameters nor the assignments change:
//!
//! 1. move the parameters one grid rung in the direction that most lowers the
//!    Jacobian-penalized objective (partition held fixed),
//! 2. assign every record to the nearest cluster mean in transformed space,
//! 3. recompute the means.
//!
//! With `LambdaMode::None` step 1 is skipped and the loop is plain Lloyd.

mod engine;
mod objective;
mod steps;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::matrix::DataMatrix;
use crate::transform::{LambdaGrid, LambdaState};

pub use engine::{
    back_transform_centers, kmeans_fit, lambda_step, run_single_start, tikmeans_fit,
    tikmeans_fit_nonhomogeneous, StartState,
};
pub use objective::{evaluate_objective, objective_breakdown, ObjectiveBreakdown};
pub use steps::{assign_step, update_centers};

/// Cluster means, one row per cluster, in transformed space.
pub type Centers = DataMatrix;

/// Hard assignment of n records to K clusters. Labels are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(usage("partition needs K >= 1"));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(usage(format!("label {bad} out of range for K={k}")));
        }
        Ok(Self { labels, k })
    }

    /// Build from 1-based cluster ids `1..=k`.
    pub fn from_one_based(ids: &[usize], k: usize) -> Result<Self> {
        if ids.contains(&0) {
            return Err(usage("1-based labels must not contain 0"));
        }
        Self::new(ids.iter().map(|&l| l - 1).collect(), k)
    }

    pub(crate) fn from_raw(labels: Vec<usize>, k: usize) -> Self {
        debug_assert!(labels.iter().all(|&l| l < k));
        Self { labels, k }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| l + 1).collect()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// True when every cluster has at least one member.
    pub fn is_complete(&self) -> bool {
        self.sizes().iter().all(|&s| s > 0)
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    /// No transformation: Lloyd K-means.
    None,
    /// One parameter per dimension.
    Shared,
    /// One parameter per (cluster, dimension) cell.
    PerCluster,
}

/// How many grid moves one parameter step may apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepType {
    /// The single most improving move over all coordinates.
    #[default]
    OneStep,
    /// The best move in each dimension.
    PerDimension,
    /// The best move in each (cluster, dimension) cell.
    PerDimensionPerCluster,
}

/// Assignment rule used when parameters differ between clusters.
///
/// `Likelihood` adds each candidate cluster's Jacobian penalty to the
/// distance, scaled by the current pooled dispersion; it reduces to the plain
/// nearest-mean rule whenever all clusters share one parameter vector and it
/// keeps the per-cluster objective non-increasing. `Distance` uses the raw
/// transformed-space distance only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignRule {
    #[default]
    Likelihood,
    Distance,
}

/// Fit configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub k: usize,
    pub lambda_mode: LambdaMode,
    pub grid: LambdaGrid,
    pub step_type: StepType,
    /// Step type used until a start first stops changing; `step_type` then
    /// takes over until convergence.
    pub warmup_step: Option<StepType>,
    pub n_starts: usize,
    /// Homogeneous starts used to build the warm start of a per-cluster fit.
    pub warm_starts: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub assign_rule: AssignRule,
}

pub const DEFAULT_SHARED_STARTS: usize = 100;
pub const DEFAULT_PER_CLUSTER_STARTS: usize = 20;
pub const DEFAULT_MAX_ITER: usize = 500;

impl RunConfig {
    /// Defaults for `mode`: default grid, one step per iteration after a
    /// warm-up with one step per dimension (per cell in per-cluster mode),
    /// 100 starts (20 for per-cluster), 500 iterations, seed 0.
    pub fn new(k: usize, lambda_mode: LambdaMode) -> Self {
        let (n_starts, warmup_step) = match lambda_mode {
            LambdaMode::PerCluster => (DEFAULT_PER_CLUSTER_STARTS, Some(StepType::PerDimensionPerCluster)),
            _ => (DEFAULT_SHARED_STARTS, Some(StepType::PerDimension)),
        };
        Self {
            k,
            lambda_mode,
            grid: LambdaGrid::default(),
            step_type: StepType::OneStep,
            warmup_step,
            n_starts,
            warm_starts: DEFAULT_SHARED_STARTS,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
            assign_rule: AssignRule::Likelihood,
        }
    }

    pub fn with_grid(mut self, grid: LambdaGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_step_type(mut self, step_type: StepType) -> Self {
        self.step_type = step_type;
        self
    }

    pub fn with_warmup_step(mut self, warmup: Option<StepType>) -> Self {
        self.warmup_step = warmup;
        self
    }

    pub fn with_starts(mut self, n_starts: usize) -> Self {
        self.n_starts = n_starts;
        self
    }

    pub fn with_warm_starts(mut self, warm_starts: usize) -> Self {
        self.warm_starts = warm_starts;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_assign_rule(mut self, rule: AssignRule) -> Self {
        self.assign_rule = rule;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    /// Switch mode, keeping every other setting.
    pub fn with_mode(mut self, mode: LambdaMode) -> Self {
        self.lambda_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(usage("K must be at least 1"));
        }
        if self.n_starts == 0 {
            return Err(usage("n_starts must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(usage("max_iter must be at least 1"));
        }
        if self.lambda_mode == LambdaMode::PerCluster && self.warm_starts == 0 {
            return Err(usage("warm_starts must be at least 1 in per-cluster mode"));
        }
        Ok(())
    }

    pub(crate) fn validate_for(&self, x: &DataMatrix) -> Result<()> {
        self.validate()?;
        if x.n_rows() <= self.k {
            return Err(usage(format!(
                "need more records than clusters: n={} but K={}",
                x.n_rows(),
                self.k
            )));
        }
        Ok(())
    }
}

/// Objective and change flags after one iteration of a start. Entry 0 of a
/// history describes the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub lambda_changed: bool,
    pub labels_changed: bool,
    /// An empty cluster was reseeded during this iteration.
    pub repaired: bool,
}

/// Result of a fit: the best start's partition, means and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub partition: Partition,
    /// Cluster means in transformed space.
    pub centers: Centers,
    pub lambda: LambdaState,
    pub objective: f64,
    /// Within-cluster sum of squares in transformed space.
    pub wss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cycle_detected: bool,
    /// Zero within-cluster scatter; the objective is negative infinity.
    pub degenerate: bool,
    pub seed: u64,
    pub start_index: usize,
    pub start_seed: u64,
    pub history: Vec<IterationRecord>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.partition.k()
    }

    /// Iterations whose objective rose by more than `slack`, ignoring repair
    /// iterations.
    pub fn descent_violations(&self, slack: f64) -> Vec<usize> {
        descent_violations(&self.history, slack)
    }
}

pub(crate) fn descent_violations(history: &[IterationRecord], slack: f64) -> Vec<usize> {
    history
        .windows(2)
        .filter(|w| !w[1].repaired && w[1].objective > w[0].objective + slack)
        .map(|w| w[1].iteration)
        .collect()
}
