use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};
use std::sync::OnceLock;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::objective::objective_breakdown;
use super::steps::{assign_with, cluster_means, repair_empty, Space};
use super::{
    AssignRule, ClusterModel, IterationRecord, LambdaMode, Partition, RunConfig, StepType,
};
use crate::error::{usage, Result};
use crate::matrix::DataMatrix;
use crate::transform::{half_log1p_sq, ihs_forward_raw, ihs_inverse, LambdaGrid, LambdaState};

/// One transformed column with its per-record penalties.
struct Column {
    values: Box<[f64]>,
    pen: Box<[f64]>,
}

/// Lazily filled table of every (dimension, grid value) transform of the data.
/// Shared read-only between parallel starts.
struct Cache<'a> {
    x: &'a DataMatrix,
    grid: &'a LambdaGrid,
    cols: Vec<OnceLock<Column>>,
}

impl<'a> Cache<'a> {
    fn new(x: &'a DataMatrix, grid: &'a LambdaGrid) -> Self {
        let cols = (0..x.n_cols() * grid.len()).map(|_| OnceLock::new()).collect();
        Self { x, grid, cols }
    }

    fn column(&self, j: usize, g: usize) -> &Column {
        self.cols[j * self.grid.len() + g].get_or_init(|| {
            let lambda = self.grid.value(g);
            let raw = self.x.rows().map(|r| r[j]);
            if lambda == 0.0 {
                Column {
                    values: raw.collect(),
                    pen: vec![0.0; self.x.n_rows()].into_boxed_slice(),
                }
            } else {
                let (values, pen) = raw
                    .map(|v| (ihs_forward_raw(v, lambda), half_log1p_sq(lambda * v)))
                    .unzip::<_, _, Vec<_>, Vec<_>>();
                Column {
                    values: values.into_boxed_slice(),
                    pen: pen.into_boxed_slice(),
                }
            }
        })
    }

    fn n(&self) -> usize {
        self.x.n_rows()
    }

    fn p(&self) -> usize {
        self.x.n_cols()
    }
}

/// Grid-index layout of the transformation parameters. `Shared` holds `p`
/// indices, `PerCluster` holds `k * p` indices in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Shared,
    PerCluster,
}

struct View<'c> {
    cols: Vec<&'c Column>,
    p: usize,
    per_cluster: bool,
}

impl<'c> View<'c> {
    fn new(cache: &'c Cache<'_>, layout: Layout, lam: &[usize]) -> Self {
        let p = cache.p();
        let cols = lam
            .iter()
            .enumerate()
            .map(|(cell, &g)| cache.column(cell % p, g))
            .collect();
        Self {
            cols,
            p,
            per_cluster: layout == Layout::PerCluster,
        }
    }

    #[inline]
    fn col(&self, cluster: usize, j: usize) -> &'c Column {
        if self.per_cluster {
            self.cols[cluster * self.p + j]
        } else {
            self.cols[j]
        }
    }

    /// Penalty of record `i` if it were assigned to `cluster`.
    fn penalty(&self, i: usize, cluster: usize) -> f64 {
        (0..self.p).map(|j| self.col(cluster, j).pen[i]).sum()
    }
}

impl Space for View<'_> {
    fn n(&self) -> usize {
        self.cols[0].values.len()
    }

    fn p(&self) -> usize {
        self.p
    }

    #[inline]
    fn value(&self, i: usize, cluster: usize, j: usize) -> f64 {
        self.col(cluster, j).values[i]
    }
}

/// Scatter and penalty of one (cluster, dimension) cell.
fn cell_stats(col: &Column, members: &[usize]) -> (f64, f64) {
    if members.is_empty() {
        return (0.0, 0.0);
    }
    let mean = members.iter().map(|&i| col.values[i]).sum::<f64>() / members.len() as f64;
    members.iter().fold((0.0, 0.0), |(w, pen), &i| {
        let d = col.values[i] - mean;
        (w + d * d, pen + col.pen[i])
    })
}

fn members_of(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    members
}

/// Per-cell scatter and penalty (`k * p` each, row-major) for a state. The
/// objective is always summed over these arrays in index order, so equal
/// states give bit-identical objectives.
struct Cells {
    wss: Vec<f64>,
    pen: Vec<f64>,
}

impl Cells {
    fn compute(view: &View<'_>, members: &[Vec<usize>]) -> Self {
        let (k, p) = (members.len(), view.p);
        let mut wss = vec![0.0; k * p];
        let mut pen = vec![0.0; k * p];
        for (c, m) in members.iter().enumerate() {
            for j in 0..p {
                let (w, q) = cell_stats(view.col(c, j), m);
                wss[c * p + j] = w;
                pen[c * p + j] = q;
            }
        }
        Self { wss, pen }
    }

    fn total_wss(&self) -> f64 {
        self.wss.iter().sum()
    }

    fn objective(&self, half_np: f64) -> f64 {
        objective_value(half_np, self.wss.iter().sum(), self.pen.iter().sum())
    }
}

#[inline]
fn objective_value(half_np: f64, wss: f64, pen: f64) -> f64 {
    if wss == 0.0 {
        f64::NEG_INFINITY
    } else {
        half_np * wss.ln() + pen
    }
}

/// A candidate single-rung move and the cell values it produces.
struct Move {
    coord: usize,
    g: usize,
    objective: f64,
    cells: Vec<(usize, f64, f64)>,
}

/// Dimension of coordinate `coord`.
fn coord_dim(layout: Layout, p: usize, coord: usize) -> usize {
    match layout {
        Layout::Shared => coord,
        Layout::PerCluster => coord % p,
    }
}

fn cells_for_move(
    cache: &Cache<'_>,
    layout: Layout,
    members: &[Vec<usize>],
    coord: usize,
    g: usize,
) -> Vec<(usize, f64, f64)> {
    let p = cache.p();
    match layout {
        Layout::Shared => {
            let col = cache.column(coord, g);
            members
                .iter()
                .enumerate()
                .map(|(c, m)| {
                    let (w, q) = cell_stats(col, m);
                    (c * p + coord, w, q)
                })
                .collect()
        }
        Layout::PerCluster => {
            let (c, j) = (coord / p, coord % p);
            let (w, q) = cell_stats(cache.column(j, g), &members[c]);
            vec![(coord, w, q)]
        }
    }
}

fn objective_with(cells: &Cells, changes: &[(usize, f64, f64)], half_np: f64) -> f64 {
    let mut wss = cells.wss.clone();
    let mut pen = cells.pen.clone();
    for &(cell, w, q) in changes {
        wss[cell] = w;
        pen[cell] = q;
    }
    objective_value(half_np, wss.iter().sum(), pen.iter().sum())
}

/// One parameter step at a fixed partition. Returns the new indices when an
/// improving move was applied.
fn lambda_step_idx(
    cache: &Cache<'_>,
    layout: Layout,
    members: &[Vec<usize>],
    lam: &[usize],
    cells: &Cells,
    step_type: StepType,
) -> Option<Vec<usize>> {
    let half_np = 0.5 * (cache.n() * cache.p()) as f64;
    let current = cells.objective(half_np);
    let top = cache.grid.len() - 1;

    // best improving move of every coordinate; down is tried before up
    let mut best_per_coord: Vec<Option<Move>> = Vec::with_capacity(lam.len());
    for (coord, &g) in lam.iter().enumerate() {
        let mut best: Option<Move> = None;
        let rungs = [g.checked_sub(1), (g < top).then_some(g + 1)];
        for g_new in rungs.into_iter().flatten() {
            let changes = cells_for_move(cache, layout, members, coord, g_new);
            let obj = objective_with(cells, &changes, half_np);
            let bar = best.as_ref().map_or(current, |m| m.objective);
            if obj < bar {
                best = Some(Move {
                    coord,
                    g: g_new,
                    objective: obj,
                    cells: changes,
                });
            }
        }
        best_per_coord.push(best);
    }

    let single = best_per_coord
        .iter()
        .flatten()
        .fold(None::<&Move>, |acc, m| match acc {
            Some(a) if a.objective <= m.objective => Some(a),
            _ => Some(m),
        })?;

    let chosen: Vec<&Move> = match (step_type, layout) {
        (StepType::OneStep, _) => vec![single],
        (StepType::PerDimensionPerCluster, _) | (StepType::PerDimension, Layout::Shared) => {
            best_per_coord.iter().flatten().collect()
        }
        (StepType::PerDimension, Layout::PerCluster) => {
            let p = cache.p();
            let mut per_dim: Vec<Option<&Move>> = vec![None; p];
            for m in best_per_coord.iter().flatten() {
                let slot = &mut per_dim[coord_dim(layout, p, m.coord)];
                if slot.is_none_or(|s| m.objective < s.objective) {
                    *slot = Some(m);
                }
            }
            per_dim.into_iter().flatten().collect()
        }
    };

    let mut next = lam.to_vec();
    if chosen.len() > 1 {
        let changes: Vec<_> = chosen.iter().flat_map(|m| m.cells.iter().copied()).collect();
        // moves in different coordinates touch different cells
        if objective_with(cells, &changes, half_np) < current {
            for m in &chosen {
                next[m.coord] = m.g;
            }
            return Some(next);
        }
    }
    next[single.coord] = single.g;
    Some(next)
}

/// Initial configuration of a start.
enum Init {
    /// Centers (row-major `k x p`) in the start's transformed space.
    Centers(Vec<f64>),
    Partition(Vec<usize>),
}

struct StartOutcome {
    labels: Vec<usize>,
    lam: Vec<usize>,
    means: Vec<f64>,
    objective: f64,
    history: Vec<IterationRecord>,
    converged: bool,
    cycle_detected: bool,
    start_index: usize,
    start_seed: u64,
}

fn state_hash(lam: &[usize], labels: &[usize]) -> u64 {
    let mut h = DefaultHasher::new();
    lam.hash(&mut h);
    labels.hash(&mut h);
    h.finish()
}

struct Engine<'a> {
    cache: Cache<'a>,
    k: usize,
    mode: LambdaMode,
    layout: Layout,
    step_type: StepType,
    warmup_step: Option<StepType>,
    assign_rule: AssignRule,
    max_iter: usize,
}

impl<'a> Engine<'a> {
    fn new(x: &'a DataMatrix, cfg: &'a RunConfig, layout: Layout) -> Self {
        Self {
            cache: Cache::new(x, &cfg.grid),
            k: cfg.k,
            mode: cfg.lambda_mode,
            layout,
            step_type: cfg.step_type,
            warmup_step: cfg.warmup_step.filter(|&w| w != cfg.step_type),
            assign_rule: cfg.assign_rule,
            max_iter: cfg.max_iter,
        }
    }

    fn half_np(&self) -> f64 {
        0.5 * (self.cache.n() * self.cache.p()) as f64
    }

    fn n_coords(&self) -> usize {
        match self.layout {
            Layout::Shared => self.cache.p(),
            Layout::PerCluster => self.k * self.cache.p(),
        }
    }

    fn assign(&self, view: &View<'_>, means: &[f64], members: &[Vec<usize>]) -> Vec<usize> {
        let use_penalty = self.layout == Layout::PerCluster && self.assign_rule == AssignRule::Likelihood;
        if !use_penalty {
            return assign_with(view, means, self.k, 1.0, |_, _| 0.0);
        }
        let wss = Cells::compute(view, members).total_wss();
        if wss <= 0.0 {
            return assign_with(view, means, self.k, 1.0, |_, _| 0.0);
        }
        // per-record negative log-likelihood at the pooled dispersion wss / (n p)
        let scale = self.half_np() / wss;
        assign_with(view, means, self.k, scale, |i, c| view.penalty(i, c))
    }

    fn run(&self, mut lam: Vec<usize>, init: Init, start_index: usize, start_seed: u64) -> StartOutcome {
        let k = self.k;
        let half_np = self.half_np();

        let view = View::new(&self.cache, self.layout, &lam);
        let mut labels = match init {
            Init::Centers(centers) => assign_with(&view, &centers, k, 1.0, |_, _| 0.0),
            Init::Partition(labels) => labels,
        };
        let (mut means, mut counts) = cluster_means(&view, &labels, k);
        repair_empty(&view, &mut labels, k, &mut means, &mut counts);
        let mut members = members_of(&labels, k);
        let mut cells = Cells::compute(&view, &members);
        drop(view);

        let mut history = vec![IterationRecord {
            iteration: 0,
            objective: cells.objective(half_np),
            lambda_changed: false,
            labels_changed: false,
            repaired: false,
        }];
        let track_cycles = self.layout == Layout::PerCluster;
        let mut seen = HashSet::new();
        if track_cycles {
            seen.insert(state_hash(&lam, &labels));
        }
        let mut converged = false;
        let mut cycle_detected = false;
        let mut step_type = self.warmup_step.unwrap_or(self.step_type);

        for iteration in 1..=self.max_iter {
            let mut lambda_changed = false;
            if self.mode != LambdaMode::None {
                if let Some(next) =
                    lambda_step_idx(&self.cache, self.layout, &members, &lam, &cells, step_type)
                {
                    lambda_changed = next != lam;
                    lam = next;
                }
            }
            let view = View::new(&self.cache, self.layout, &lam);
            let (centers, _) = cluster_means(&view, &labels, k);
            let mut next_labels = self.assign(&view, &centers, &members);
            let (m, c) = cluster_means(&view, &next_labels, k);
            means = m;
            counts = c;
            let repaired = repair_empty(&view, &mut next_labels, k, &mut means, &mut counts);
            let labels_changed = next_labels != labels;
            labels = next_labels;
            members = members_of(&labels, k);
            cells = Cells::compute(&view, &members);

            history.push(IterationRecord {
                iteration,
                objective: cells.objective(half_np),
                lambda_changed,
                labels_changed,
                repaired,
            });
            if !lambda_changed && !labels_changed {
                if step_type != self.step_type {
                    step_type = self.step_type;
                    continue;
                }
                converged = true;
                break;
            }
            if track_cycles && !seen.insert(state_hash(&lam, &labels)) {
                cycle_detected = true;
                break;
            }
        }

        StartOutcome {
            objective: cells.objective(half_np),
            labels,
            lam,
            means,
            history,
            converged,
            cycle_detected,
            start_index,
            start_seed,
        }
    }

    fn random_start(&self, master_seed: u64, salt: u64, start_index: usize) -> StartOutcome {
        let start_seed = derive_seed(master_seed ^ salt, start_index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(start_seed);
        let lam: Vec<usize> = if self.mode == LambdaMode::None {
            vec![0; self.n_coords()]
        } else {
            let g = self.cache.grid.len();
            (0..self.n_coords()).map(|_| rng.random_range(0..g)).collect()
        };
        let picks = sample(&mut rng, self.cache.n(), self.k).into_vec();
        let view = View::new(&self.cache, self.layout, &lam);
        let p = self.cache.p();
        let mut centers = Vec::with_capacity(self.k * p);
        for (c, &i) in picks.iter().enumerate() {
            centers.extend((0..p).map(|j| view.value(i, c, j)));
        }
        drop(view);
        self.run(lam, Init::Centers(centers), start_index, start_seed)
    }

    fn to_model(&self, out: StartOutcome, seed: u64) -> Result<ClusterModel> {
        let (k, p) = (self.k, self.cache.p());
        let grid = self.cache.grid;
        let lambda = match self.layout {
            Layout::Shared => LambdaState::shared(out.lam.iter().map(|&g| grid.value(g)).collect()),
            Layout::PerCluster => LambdaState::per_cluster(
                out.lam
                    .chunks(p)
                    .map(|row| row.iter().map(|&g| grid.value(g)).collect())
                    .collect(),
            )?,
        };
        let partition = Partition::from_raw(out.labels, k);
        let breakdown = objective_breakdown(self.cache.x, &partition, &lambda)?;
        debug_assert!(
            breakdown.value == out.objective
                || (breakdown.value - out.objective).abs() <= 1e-9 * breakdown.value.abs().max(1.0)
        );
        Ok(ClusterModel {
            partition,
            centers: DataMatrix::new(k, p, out.means)?,
            lambda,
            objective: breakdown.value,
            wss: breakdown.wss,
            iterations: out.history.len() - 1,
            converged: out.converged,
            cycle_detected: out.cycle_detected,
            degenerate: breakdown.degenerate,
            seed,
            start_index: out.start_index,
            start_seed: out.start_seed,
            history: out.history,
        })
    }
}

const PER_CLUSTER_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer over (seed, index).
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Lowest objective wins; ties go to the earlier start.
fn best_of(outcomes: Vec<StartOutcome>) -> StartOutcome {
    outcomes
        .into_iter()
        .reduce(|best, o| if o.objective < best.objective { o } else { best })
        .expect("at least one start")
}

/// Multistart fit in `None` or `Shared` mode. `PerCluster` runs a shared fit
/// with `cfg.warm_starts` starts first and uses it as the warm start.
pub fn tikmeans_fit(x: &DataMatrix, cfg: &RunConfig) -> Result<ClusterModel> {
    cfg.validate_for(x)?;
    if cfg.lambda_mode == LambdaMode::PerCluster {
        let shared_cfg = cfg
            .clone()
            .with_mode(LambdaMode::Shared)
            .with_starts(cfg.warm_starts);
        let warm = tikmeans_fit(x, &shared_cfg)?;
        return tikmeans_fit_nonhomogeneous(x, cfg, Some(&warm));
    }
    let engine = Engine::new(x, cfg, Layout::Shared);
    let outcomes: Vec<StartOutcome> = (0..cfg.n_starts)
        .into_par_iter()
        .map(|s| engine.random_start(cfg.seed, 0, s))
        .collect();
    engine.to_model(best_of(outcomes), cfg.seed)
}

/// Multistart fit with one parameter vector per cluster. When `warm_start`
/// is given, start 0 replicates its parameters into every cluster and keeps
/// its partition; the remaining starts are random.
pub fn tikmeans_fit_nonhomogeneous(
    x: &DataMatrix,
    cfg: &RunConfig,
    warm_start: Option<&ClusterModel>,
) -> Result<ClusterModel> {
    cfg.validate_for(x)?;
    let mut cfg = cfg.clone();
    cfg.lambda_mode = LambdaMode::PerCluster;
    let engine = Engine::new(x, &cfg, Layout::PerCluster);

    let warm = match warm_start {
        Some(model) => {
            if model.k() != cfg.k || model.partition.len() != x.n_rows() {
                return Err(usage("warm start does not match the data and K"));
            }
            let lam = grid_indices(&model.lambda.replicate(cfg.k), &cfg.grid)?;
            Some((lam, model.partition.labels().to_vec()))
        }
        None => None,
    };
    let first_random = usize::from(warm.is_some());
    let mut outcomes = Vec::with_capacity(cfg.n_starts);
    let (warm_out, random): (Option<StartOutcome>, Vec<StartOutcome>) = rayon::join(
        || warm.map(|(lam, labels)| engine.run(lam, Init::Partition(labels), 0, cfg.seed)),
        || {
            (first_random..cfg.n_starts)
                .into_par_iter()
                .map(|s| engine.random_start(cfg.seed, PER_CLUSTER_SALT, s))
                .collect()
        },
    );
    outcomes.extend(warm_out);
    outcomes.extend(random);
    engine.to_model(best_of(outcomes), cfg.seed)
}

/// Plain Lloyd K-means with `n_starts` random starts.
pub fn kmeans_fit(x: &DataMatrix, k: usize, n_starts: usize, max_iter: usize, seed: u64) -> Result<ClusterModel> {
    let cfg = RunConfig::new(k, LambdaMode::None)
        .with_starts(n_starts)
        .with_max_iter(max_iter)
        .with_seed(seed);
    tikmeans_fit(x, &cfg)
}

fn grid_indices(lambda: &LambdaState, grid: &LambdaGrid) -> Result<Vec<usize>> {
    lambda
        .all_values()
        .into_iter()
        .map(|v| {
            grid.index_of(v)
                .ok_or_else(|| usage(format!("lambda {v} is not on the grid")))
        })
        .collect()
}

fn layout_of(lambda: &LambdaState) -> Layout {
    match lambda {
        LambdaState::Shared { .. } => Layout::Shared,
        LambdaState::PerCluster { .. } => Layout::PerCluster,
    }
}

/// Explicit starting point for [`run_single_start`]: parameters plus either
/// initial centers (in the transformed space of those parameters) or an
/// initial partition.
#[derive(Debug, Clone)]
pub struct StartState {
    pub lambda: LambdaState,
    pub centers: Option<DataMatrix>,
    pub partition: Option<Partition>,
}

/// Run one start from an explicit state. The full iteration history is kept
/// on the returned model.
pub fn run_single_start(x: &DataMatrix, cfg: &RunConfig, start: StartState) -> Result<ClusterModel> {
    cfg.validate_for(x)?;
    let (k, p) = (cfg.k, x.n_cols());
    start.lambda.validate(k, p, Some(&cfg.grid))?;
    let layout = layout_of(&start.lambda);
    match (cfg.lambda_mode, layout) {
        (LambdaMode::None, _) if !start.lambda.is_zero() => {
            return Err(usage("lambda mode none needs an all-zero lambda"))
        }
        (LambdaMode::None | LambdaMode::Shared, Layout::PerCluster)
        | (LambdaMode::PerCluster, Layout::Shared) => {
            return Err(usage("lambda layout does not match the lambda mode"))
        }
        _ => {}
    }
    let lam = grid_indices(&start.lambda, &cfg.grid)?;
    let init = match (start.partition, start.centers) {
        (Some(part), _) => {
            if part.len() != x.n_rows() || part.k() != k {
                return Err(usage("start partition does not match the data and K"));
            }
            Init::Partition(part.labels().to_vec())
        }
        (None, Some(centers)) => {
            if centers.n_rows() != k || centers.n_cols() != p {
                return Err(usage("start centers must be K x p"));
            }
            Init::Centers(centers.as_slice().to_vec())
        }
        (None, None) => return Err(usage("a start needs centers or a partition")),
    };
    let engine = Engine::new(x, cfg, layout);
    let out = engine.run(lam, init, 0, cfg.seed);
    engine.to_model(out, cfg.seed)
}

/// One parameter step at a fixed partition, exposed for inspection and tests.
pub fn lambda_step(
    x: &DataMatrix,
    partition: &Partition,
    lambda: &LambdaState,
    grid: &LambdaGrid,
    step_type: StepType,
) -> Result<LambdaState> {
    let (k, p) = (partition.k(), x.n_cols());
    if partition.len() != x.n_rows() {
        return Err(usage("partition length does not match the data"));
    }
    lambda.validate(k, p, Some(grid))?;
    let layout = layout_of(lambda);
    let lam = grid_indices(lambda, grid)?;
    let cache = Cache::new(x, grid);
    let members = members_of(partition.labels(), k);
    let view = View::new(&cache, layout, &lam);
    let cells = Cells::compute(&view, &members);
    let Some(next) = lambda_step_idx(&cache, layout, &members, &lam, &cells, step_type) else {
        return Ok(lambda.clone());
    };
    Ok(match layout {
        Layout::Shared => LambdaState::shared(next.iter().map(|&g| grid.value(g)).collect()),
        Layout::PerCluster => LambdaState::per_cluster(
            next.chunks(p)
                .map(|r| r.iter().map(|&g| grid.value(g)).collect())
                .collect(),
        )?,
    })
}

/// Cluster means mapped back to the original data space.
pub fn back_transform_centers(model: &ClusterModel) -> Result<DataMatrix> {
    model
        .centers
        .map_cells(|c, j, v| ihs_inverse(v, model.lambda.get(c, j)))
}
