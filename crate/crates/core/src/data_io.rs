//! Dataset loading, preprocessing and the skewed-cluster simulator.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result, TikError};
use crate::matrix::DataMatrix;
use crate::transform::ihs_inverse;

/// Feature matrix with optional reference labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: DataMatrix,
    pub labels: Option<Vec<String>>,
    pub feature_names: Vec<String>,
    /// Source path or generator description.
    pub provenance: String,
}

impl Dataset {
    pub fn new(x: DataMatrix, labels: Option<Vec<String>>, provenance: impl Into<String>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != x.n_rows() {
                return Err(usage(format!(
                    "{} labels for {} records",
                    l.len(),
                    x.n_rows()
                )));
            }
        }
        Ok(Self {
            feature_names: x.names_or_default(),
            x,
            labels,
            provenance: provenance.into(),
        })
    }

    pub fn with_x(mut self, x: DataMatrix) -> Self {
        self.x = x.with_names(self.feature_names.clone()).expect("same width");
        self
    }

    /// Write features and, when present, a trailing `label` column.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.feature_names.clone();
        if self.labels.is_some() {
            header.push("label".to_string());
        }
        w.write_record(&header)?;
        for (i, row) in self.x.rows().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].clone());
            }
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

/// Read a headed, comma-separated file. `label_column` names a column that is
/// kept as text labels; every other column must hold finite numbers.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| TikError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let format = |message: String| TikError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| format(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| format(format!("no column named '{name}'")))?,
        ),
        None => None,
    };
    let feature_idx: Vec<usize> = (0..header.len()).filter(|&j| Some(j) != label_idx).collect();
    if feature_idx.is_empty() {
        return Err(format("no feature columns".to_string()));
    }

    let mut data = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    let mut n = 0;
    for (r, record) in reader.records().enumerate() {
        // 1-based file line, header is line 1
        let row = r + 2;
        let record = record.map_err(|e| format(format!("row {row}: {e}")))?;
        for &j in &feature_idx {
            let cell = &record[j];
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| TikError::ParseCell {
                    path: path.to_path_buf(),
                    row,
                    column: header[j].clone(),
                    value: cell.to_string(),
                })?;
            data.push(v);
        }
        if let (Some(j), Some(l)) = (label_idx, labels.as_mut()) {
            l.push(record[j].to_string());
        }
        n += 1;
    }
    if n == 0 {
        return Err(format("no data rows".to_string()));
    }
    let names = feature_idx.iter().map(|&j| header[j].clone()).collect();
    let x = DataMatrix::new(n, feature_idx.len(), data)?.with_names(names)?;
    Dataset::new(x, labels, path.display().to_string())
}

/// Root mean square of each column with the `n - 1` divisor, no centering.
pub fn column_rms(x: &DataMatrix) -> Vec<f64> {
    let denom = (x.n_rows().max(2) - 1) as f64;
    (0..x.n_cols())
        .map(|j| (x.rows().map(|r| r[j] * r[j]).sum::<f64>() / denom).sqrt())
        .collect()
}

/// Divide each column by its RMS. Returns the scaled data and the factors.
pub fn rms_scale(x: &DataMatrix) -> Result<(DataMatrix, Vec<f64>)> {
    let factors = column_rms(x);
    let names = x.names_or_default();
    if let Some(j) = factors.iter().position(|&f| f == 0.0) {
        return Err(usage(format!("column '{}' is all zero and cannot be scaled", names[j])));
    }
    let scaled = x.map_cells(|_, j, v| Ok(v / factors[j]))?;
    Ok((scaled, factors))
}

/// Shift every column holding a value `<= 0` by `margin - min`, so its minimum
/// becomes `margin`. Returns the shifted data and the offsets (0 for columns
/// left alone).
pub fn shift_positive(x: &DataMatrix, margin: f64) -> Result<(DataMatrix, Vec<f64>)> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(usage(format!("margin must be positive, got {margin}")));
    }
    shift_by(x, &vec![margin; x.n_cols()])
}

/// [`shift_positive`] with a per-column margin of 1% of the column RMS.
pub fn shift_positive_default(x: &DataMatrix) -> Result<(DataMatrix, Vec<f64>)> {
    let margins: Vec<f64> = column_rms(x)
        .into_iter()
        .map(|r| if r > 0.0 { 0.01 * r } else { 0.01 })
        .collect();
    shift_by(x, &margins)
}

fn shift_by(x: &DataMatrix, margins: &[f64]) -> Result<(DataMatrix, Vec<f64>)> {
    let offsets: Vec<f64> = (0..x.n_cols())
        .map(|j| {
            let min = x.rows().map(|r| r[j]).fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                margins[j] - min
            } else {
                0.0
            }
        })
        .collect();
    let shifted = x.map_cells(|_, j, v| Ok(v + offsets[j]))?;
    Ok((shifted, offsets))
}

/// Generator for clusters that are spherical Gaussians after the forward
/// transform with `lambda_true`, and skewed in the observed space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n_per_cluster: Vec<usize>,
    /// One row of latent means per cluster.
    pub latent_means: Vec<Vec<f64>>,
    pub latent_sd: f64,
    pub lambda_true: Vec<f64>,
}

pub const PAPER_TOY: &str = "paper-toy";

impl SimulationSpec {
    /// Two clusters in the plane observed through `lambda = (1.4, 0.9)`.
    ///
    /// Latent parameters come from `examples/tune_toy.rs`: plain K-means on
    /// the observed data splits along the long skewed tails (ARI below 0.1)
    /// while the latent clusters stay well apart.
    pub fn paper_toy() -> Self {
        Self {
            n_per_cluster: vec![100, 100],
            latent_means: vec![vec![2.0, -1.0], vec![2.0, 2.0]],
            latent_sd: 0.5,
            lambda_true: vec![1.4, 0.9],
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            PAPER_TOY => Ok(Self::paper_toy()),
            other => Err(usage(format!("unknown preset '{other}' (known: {PAPER_TOY})"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.lambda_true.len();
        if p == 0 || self.n_per_cluster.is_empty() {
            return Err(usage("simulation needs at least one cluster and one dimension"));
        }
        if self.latent_means.len() != self.n_per_cluster.len() {
            return Err(usage("one row of latent means per cluster is required"));
        }
        if self.latent_means.iter().any(|m| m.len() != p) {
            return Err(usage("latent means must have one entry per lambda"));
        }
        if self.n_per_cluster.iter().sum::<usize>() == 0 {
            return Err(usage("simulation needs at least one record"));
        }
        if !(self.latent_sd >= 0.0 && self.latent_sd.is_finite()) {
            return Err(usage("latent sd must be finite and non-negative"));
        }
        if self.lambda_true.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(usage("lambda entries must be finite and non-negative"));
        }
        if self.latent_means.iter().flatten().any(|m| !m.is_finite()) {
            return Err(usage("latent means must be finite"));
        }
        Ok(())
    }
}

/// Latent Gaussian draws and the observed data derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub dataset: Dataset,
    pub latent: DataMatrix,
}

/// Draw latent spherical Gaussian clusters and map them through the inverse
/// transform. Labels are the generating cluster, 1-based.
pub fn simulate_skewed(spec: &SimulationSpec, seed: u64) -> Result<Simulation> {
    spec.validate()?;
    let p = spec.lambda_true.len();
    let normal = Normal::new(0.0, spec.latent_sd).map_err(|e| usage(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = spec.n_per_cluster.iter().sum();
    let mut latent = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for (c, (&count, mean)) in spec.n_per_cluster.iter().zip(&spec.latent_means).enumerate() {
        for _ in 0..count {
            latent.extend(mean.iter().map(|m| m + normal.sample(&mut rng)));
            labels.push((c + 1).to_string());
        }
    }
    let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    let latent = DataMatrix::new(n, p, latent)?.with_names(names)?;
    let x = latent.map_cells(|_, j, v| ihs_inverse(v, spec.lambda_true[j]))?;
    let provenance = format!(
        "simulate_skewed(n={:?}, means={:?}, sd={}, lambda={:?}, seed={seed})",
        spec.n_per_cluster, spec.latent_means, spec.latent_sd, spec.lambda_true
    );
    Ok(Simulation {
        dataset: Dataset::new(x, Some(labels), provenance)?,
        latent,
    })
}

/// Directory of the CSV fixtures shipped with the crate.
pub fn bundled_data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}
