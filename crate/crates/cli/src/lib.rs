//! Command implementations behind the `tikmeans` binary.

pub mod args;
pub mod report;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use tikmeans::clustering::{back_transform_centers, tikmeans_fit, LambdaMode, RunConfig, StepType};
use tikmeans::data_io::{
    load_csv, rms_scale, shift_positive_default, simulate_skewed, Dataset, SimulationSpec,
};
use tikmeans::metrics::{adjusted_rand_index, confusion_matrix};
use tikmeans::model_selection::{jump_selection, kmax_default};
use tikmeans::transform::{inverse_transform_matrix, transform_matrix};
use tikmeans::{DataMatrix, LambdaGrid, LambdaState, Partition, TikError};

use args::{
    ClusterArgs, Command, EngineArgs, FormatArg, InputArgs, ScaleArg, SelectKArgs, SimulateArgs,
    TransformArgs, WarmupArg,
};
use report::{ConfigEcho, Evaluation, ModelSummary, RunReport, Timing, SCHEMA_VERSION};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Failed = 1,
    Warning = 2,
}

#[derive(Debug)]
pub struct CliError(pub String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<TikError> for CliError {
    fn from(e: TikError) -> Self {
        Self(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn fail<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError(msg.into()))
}

pub fn run(command: Command) -> Result<Status> {
    match command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::SelectK(a) => cmd_select_k(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Transform(a) => cmd_transform(a),
    }
}

fn write_out(path: Option<&Path>, content: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| CliError(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Data after the requested preprocessing, with what it takes to undo it.
struct Prepared {
    dataset: Dataset,
    offsets: Option<Vec<f64>>,
    factors: Option<Vec<f64>>,
}

fn prepare(input: &InputArgs) -> Result<Prepared> {
    let mut dataset = load_csv(&input.input, input.labels.as_deref())?;
    let mut offsets = None;
    let mut factors = None;
    if input.shift_positive {
        let (x, o) = shift_positive_default(&dataset.x)?;
        dataset = dataset.with_x(x);
        offsets = Some(o);
    }
    if input.scale == ScaleArg::Rms {
        let (x, f) = rms_scale(&dataset.x)?;
        dataset = dataset.with_x(x);
        factors = Some(f);
    }
    Ok(Prepared {
        dataset,
        offsets,
        factors,
    })
}

fn run_config(engine: &EngineArgs, k: usize) -> Result<RunConfig> {
    let mode: LambdaMode = engine.lambda_mode.into();
    let grid = LambdaGrid::parse_spec(&engine.grid)?;
    let mut cfg = RunConfig::new(k, mode)
        .with_grid(grid)
        .with_step_type(engine.step_type.into())
        .with_assign_rule(engine.assign_rule.into())
        .with_warm_starts(engine.warm_starts)
        .with_max_iter(engine.max_iter)
        .with_seed(engine.seed);
    if let Some(starts) = engine.starts {
        cfg = cfg.with_starts(starts);
    }
    if let Some(w) = engine.warmup_step {
        cfg = cfg.with_warmup_step(match w {
            WarmupArg::Off => None,
            WarmupArg::PerDimension => Some(StepType::PerDimension),
            WarmupArg::PerDimensionPerCluster => Some(StepType::PerDimensionPerCluster),
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_cluster(a: ClusterArgs) -> Result<Status> {
    let started = Instant::now();
    let prep = prepare(&a.input)?;
    let cfg = run_config(&a.engine, a.k)?;
    let x = &prep.dataset.x;
    let model = tikmeans_fit(x, &cfg)?;

    let back = back_transform_centers(&model)?;
    let centers = back.map_cells(|_, j, v| {
        let v = prep.factors.as_ref().map_or(v, |f| v * f[j]);
        Ok(prep.offsets.as_ref().map_or(v, |o| v - o[j]))
    })?;
    let labels = model.partition.one_based();
    let evaluation = match &prep.dataset.labels {
        Some(reference) => Some(Evaluation {
            ari: adjusted_rand_index(reference, &labels.iter().map(|l| l.to_string()).collect::<Vec<_>>())?,
            confusion: confusion_matrix(reference, &labels)?,
        }),
        None => None,
    };

    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: ConfigEcho {
            input: a.input.input.display().to_string(),
            feature_names: prep.dataset.feature_names.clone(),
            n: x.n_rows(),
            p: x.n_cols(),
            k: cfg.k,
            lambda_mode: cfg.lambda_mode,
            grid: cfg.grid.values().to_vec(),
            step_type: cfg.step_type,
            warmup_step: cfg.warmup_step,
            assign_rule: cfg.assign_rule,
            n_starts: cfg.n_starts,
            warm_starts: cfg.warm_starts,
            max_iter: cfg.max_iter,
            seed: cfg.seed,
            scale: a.input.scale,
            scale_factors: prep.factors.clone(),
            shift_positive: a.input.shift_positive,
            shift_offsets: prep.offsets.clone(),
            label_column: a.input.labels.clone(),
        },
        model: ModelSummary {
            cluster_sizes: model.partition.sizes(),
            labels: labels.clone(),
            lambda: model.lambda.clone(),
            objective: model.objective.is_finite().then_some(model.objective),
            wss: model.wss,
            iterations: model.iterations,
            converged: model.converged,
            cycle_detected: model.cycle_detected,
            degenerate: model.degenerate,
            start_index: model.start_index,
            start_seed: model.start_seed,
        },
        centers: centers.to_rows(),
        centers_transformed: model.centers.to_rows(),
        evaluation,
        timing: (!a.no_timing).then(|| Timing {
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            threads: rayon::current_num_threads(),
        }),
    };

    let body = match a.format {
        FormatArg::Json => {
            let mut s = serde_json::to_string_pretty(&report)?;
            s.push('\n');
            s
        }
        FormatArg::Csv => {
            let mut s = String::from("row,cluster");
            if prep.dataset.labels.is_some() {
                s.push_str(",reference");
            }
            s.push('\n');
            for (i, l) in labels.iter().enumerate() {
                s.push_str(&format!("{},{l}", i + 1));
                if let Some(r) = &prep.dataset.labels {
                    s.push(',');
                    s.push_str(&r[i]);
                }
                s.push('\n');
            }
            s
        }
    };
    write_out(a.output.as_deref(), body.as_bytes())?;

    if let Some(ev) = &report.evaluation {
        eprintln!("ARI: {:.4}", ev.ari);
        eprint!("{}", ev.confusion);
    }
    if model.cycle_detected || !model.converged {
        eprintln!(
            "warning: best model {}",
            if model.cycle_detected { "stopped on a cycle" } else { "did not converge" }
        );
        return Ok(Status::Warning);
    }
    Ok(Status::Ok)
}

fn eta_grid(a: &SelectKArgs) -> Result<Vec<f64>> {
    let (lo, hi, gap, count) = (a.eta_min, a.eta_max, a.eta_gap, a.eta_count);
    if !(lo < 0.0 && hi > 0.0 && gap > 0.0 && gap < -lo && gap < hi && count >= 2) {
        return fail("eta grid needs eta-min < -eta-gap < 0 < eta-gap < eta-max and eta-count >= 2");
    }
    let side = |a: f64, b: f64| {
        (0..count).map(move |i| {
            let t = i as f64 / (count - 1) as f64;
            a * (1.0 - t) + b * t
        })
    };
    Ok(side(lo, -gap).chain(side(gap, hi)).collect())
}

fn cmd_select_k(a: SelectKArgs) -> Result<Status> {
    let prep = prepare(&a.input)?;
    let kmax = a.kmax.unwrap_or_else(|| kmax_default(a.k_true_hint));
    let cfg = run_config(&a.engine, 1)?;
    let etas = eta_grid(&a)?;
    let profile = jump_selection(&prep.dataset.x, kmax, &etas, &cfg)?;

    let mut out = String::new();
    out.push_str(&format!(
        "config: input={} kmax={kmax} lambda_mode={:?} starts={} seed={} scale={:?} eta=[{}, {}] gap={} count={}\n",
        a.input.input.display(),
        cfg.lambda_mode,
        cfg.n_starts,
        cfg.seed,
        a.input.scale,
        a.eta_min,
        a.eta_max,
        a.eta_gap,
        2 * a.eta_count
    ));
    out.push_str(&profile.distortions_csv());
    out.push_str(&format!("selected K: {}\n", profile.selected_k));
    write_out(None, out.as_bytes())?;
    if let Some(p) = &a.csv {
        write_out(Some(p), profile.to_csv().as_bytes())?;
    }
    if let Some(p) = &a.svg {
        write_out(Some(p), profile.to_svg().as_bytes())?;
    }
    if profile.fallback {
        eprintln!("warning: no K strictly between 1 and K_max was chosen; reporting the most frequent K");
        return Ok(Status::Warning);
    }
    Ok(Status::Ok)
}

fn parse_means(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError(format!("cannot parse '{}' in --means", v.trim())))
                })
                .collect()
        })
        .collect()
}

fn cmd_simulate(a: SimulateArgs) -> Result<Status> {
    let mut spec = match &a.preset {
        Some(name) => SimulationSpec::preset(name)?,
        None => {
            if a.n_per_cluster.is_none() || a.means.is_none() || a.sd.is_none() || a.lambda.is_none() {
                return fail("without --preset, --n-per-cluster, --means, --sd and --lambda are required");
            }
            SimulationSpec {
                n_per_cluster: Vec::new(),
                latent_means: Vec::new(),
                latent_sd: 0.0,
                lambda_true: Vec::new(),
            }
        }
    };
    if let Some(n) = a.n_per_cluster {
        spec.n_per_cluster = n;
    }
    if let Some(m) = &a.means {
        spec.latent_means = parse_means(m)?;
    }
    if let Some(sd) = a.sd {
        spec.latent_sd = sd;
    }
    if let Some(l) = a.lambda {
        spec.lambda_true = l;
    }
    let sim = simulate_skewed(&spec, a.seed)?;
    let mut buf = Vec::new();
    sim.dataset.write_csv(&mut buf)?;
    write_out(a.output.as_deref(), &buf)?;
    Ok(Status::Ok)
}

fn cmd_transform(a: TransformArgs) -> Result<Status> {
    let dataset = load_csv(&a.input, a.labels.as_deref())?;
    let x = &dataset.x;
    let (lambda, partition) = match (&a.lambda, &a.from_report) {
        (Some(l), _) => (LambdaState::shared(l.clone()), None),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
            let report: RunReport = serde_json::from_str(&text)?;
            let k = report.model.cluster_sizes.len();
            let partition = Partition::from_one_based(&report.model.labels, k)?;
            (report.model.lambda, Some(partition))
        }
        (None, None) => return fail("either --lambda or --from-report is required"),
    };
    if lambda.n_dims() != x.n_cols() {
        return fail(format!(
            "{} lambda values for {} feature columns",
            lambda.n_dims(),
            x.n_cols()
        ));
    }
    if let Some(p) = &partition {
        if p.len() != x.n_rows() {
            return fail("report labels do not match the input rows");
        }
    }
    let y: DataMatrix = if a.inverse {
        inverse_transform_matrix(x, &lambda, partition.as_ref())?
    } else {
        transform_matrix(x, &lambda, partition.as_ref())?
    };
    let out = dataset.with_x(y);
    let mut buf = Vec::new();
    out.write_csv(&mut buf)?;
    write_out(a.output.as_deref(), &buf)?;
    Ok(Status::Ok)
}
