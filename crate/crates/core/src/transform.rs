//! Inverse hyperbolic sine (IHS) transformation family.
//!
//! The forward map is `asinh(lambda * x) / lambda` for `lambda > 0` and the
//! identity for `lambda == 0`. Its inverse is `sinh(lambda * y) / lambda`.
//! Every coordinate of a record gets its own `lambda`; in per-cluster mode the
//! parameter also depends on the cluster the record is assigned to.

use serde::{Deserialize, Serialize};

use crate::clustering::Partition;
use crate::error::{usage, Result, TikError};
use crate::matrix::DataMatrix;

/// Identifier of the symmetrizing transformation in use. Only IHS ships.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformFamily {
    #[default]
    Ihs,
}

// Beyond this magnitude s*s overflows; asinh(s) = ln(2s) to full precision there.
const LARGE_ARG: f64 = 1e150;

/// `asinh(s)` for `s >= 0`, via `log1p` so small arguments keep full precision.
#[inline]
fn asinh_nonneg(s: f64) -> f64 {
    if s > LARGE_ARG {
        std::f64::consts::LN_2 + s.ln()
    } else {
        let s2 = s * s;
        (s + s2 / (1.0 + (1.0 + s2).sqrt())).ln_1p()
    }
}

/// `0.5 * ln(1 + s^2)`, the positive per-cell Jacobian penalty.
#[inline]
pub(crate) fn half_log1p_sq(s: f64) -> f64 {
    let s = s.abs();
    if s > LARGE_ARG {
        s.ln()
    } else {
        0.5 * (s * s).ln_1p()
    }
}

/// Forward IHS without input validation. `lambda` must be finite and >= 0.
#[inline]
pub(crate) fn ihs_forward_raw(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return x;
    }
    let y = asinh_nonneg(lambda * x.abs()) / lambda;
    if x.is_sign_negative() {
        -y
    } else {
        y
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(TikError::Domain(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(TikError::Domain(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}

/// Forward IHS transform of a single value.
///
/// Exact identity at `lambda == 0`; odd and strictly increasing in `x`.
pub fn ihs_forward(x: f64, lambda: f64) -> Result<f64> {
    check_finite("x", x)?;
    check_lambda(lambda)?;
    Ok(ihs_forward_raw(x, lambda))
}

/// Inverse IHS transform, `sinh(lambda * y) / lambda`.
///
/// Overflow of `sinh` is reported as [`TikError::Range`].
pub fn ihs_inverse(y: f64, lambda: f64) -> Result<f64> {
    check_finite("y", y)?;
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(y);
    }
    let x = (lambda * y).sinh() / lambda;
    if !x.is_finite() {
        return Err(TikError::Range(format!(
            "sinh({lambda} * {y}) / {lambda} overflows"
        )));
    }
    Ok(x)
}

/// Single-coordinate log-Jacobian of the forward transform,
/// `-0.5 * ln(lambda^2 x^2 + 1)`. Never positive.
pub fn log_jacobian_term(x: f64, lambda: f64) -> Result<f64> {
    check_finite("x", x)?;
    check_lambda(lambda)?;
    Ok(-half_log1p_sq(lambda * x))
}

/// Ordered discrete set of candidate transformation parameters.
///
/// Strictly increasing, non-negative, contains 0 and has at least two rungs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl TryFrom<Vec<f64>> for LambdaGrid {
    type Error = TikError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LambdaGrid> for Vec<f64> {
    fn from(grid: LambdaGrid) -> Self {
        grid.values
    }
}

impl Default for LambdaGrid {
    /// `{0} ∪ {0.01 * 1.25^j : j = 0..=38}`, denser at small values.
    fn default() -> Self {
        let mut values = vec![0.0];
        values.extend((0..=38).map(|j| 0.01 * 1.25f64.powi(j)));
        Self { values }
    }
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(usage("lambda grid needs at least two values"));
        }
        for v in &values {
            if !v.is_finite() || *v < 0.0 {
                return Err(TikError::Domain(format!(
                    "lambda grid values must be finite and >= 0, got {v}"
                )));
            }
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(usage("lambda grid must be strictly increasing"));
        }
        if values[0] != 0.0 {
            return Err(usage("lambda grid must contain 0"));
        }
        Ok(Self { values })
    }

    /// Parse a grid specification.
    ///
    /// Terms are separated by `;`. A term is either a comma list of explicit
    /// values (`0,0.5,1`) or a range `start,step..end` (`0,0.05..2`). The
    /// keyword `default` expands to [`LambdaGrid::default`]. The union of all
    /// terms is sorted and deduplicated.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let mut values = Vec::new();
        for term in spec.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            if term.eq_ignore_ascii_case("default") {
                values.extend(Self::default().values);
            } else if let Some((head, end)) = term.split_once("..") {
                let (start, step) = head
                    .split_once(',')
                    .ok_or_else(|| usage(format!("range '{term}' must look like start,step..end")))?;
                let start = parse_num(start)?;
                let step = parse_num(step)?;
                let end = parse_num(end)?;
                if step <= 0.0 || end < start {
                    return Err(usage(format!("range '{term}' needs step > 0 and end >= start")));
                }
                let count = ((end - start) / step + 1e-9).floor() as usize;
                if count > 100_000 {
                    return Err(usage(format!("range '{term}' expands to too many values")));
                }
                values.extend((0..=count).map(|i| start + step * i as f64));
            } else {
                for item in term.split(',') {
                    values.push(parse_num(item)?);
                }
            }
        }
        values.sort_by(f64::total_cmp);
        values.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Index of an exact grid member.
    pub fn index_of(&self, lambda: f64) -> Option<usize> {
        self.values.iter().position(|&v| v == lambda)
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.index_of(lambda).is_some()
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| usage(format!("cannot parse '{}' as a number", s.trim())))
}

/// Which transformation-parameter layout a model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaLayout {
    Shared,
    PerCluster,
}

/// Transformation parameters: one per dimension (shared by all clusters) or
/// one per (cluster, dimension) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum LambdaState {
    Shared { values: Vec<f64> },
    PerCluster { values: Vec<Vec<f64>> },
}

impl LambdaState {
    pub fn shared(values: Vec<f64>) -> Self {
        Self::Shared { values }
    }

    pub fn per_cluster(rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || p == 0 || rows.iter().any(|r| r.len() != p) {
            return Err(usage("per-cluster lambda must be a non-empty K x p matrix"));
        }
        Ok(Self::PerCluster { values: rows })
    }

    pub fn zeros(p: usize) -> Self {
        Self::shared(vec![0.0; p])
    }

    pub fn layout(&self) -> LambdaLayout {
        match self {
            Self::Shared { .. } => LambdaLayout::Shared,
            Self::PerCluster { .. } => LambdaLayout::PerCluster,
        }
    }

    pub fn n_dims(&self) -> usize {
        match self {
            Self::Shared { values } => values.len(),
            Self::PerCluster { values } => values[0].len(),
        }
    }

    /// The parameter applied to dimension `j` of a record in `cluster`.
    #[inline]
    pub fn get(&self, cluster: usize, j: usize) -> f64 {
        match self {
            Self::Shared { values } => values[j],
            Self::PerCluster { values } => values[cluster][j],
        }
    }

    /// Per-cluster copy with the shared vector replicated into `k` rows.
    pub fn replicate(&self, k: usize) -> Self {
        match self {
            Self::Shared { values } => Self::PerCluster {
                values: vec![values.clone(); k],
            },
            Self::PerCluster { .. } => self.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Shared { values } => values.iter().all(|&v| v == 0.0),
            Self::PerCluster { values } => values.iter().flatten().all(|&v| v == 0.0),
        }
    }

    pub fn all_values(&self) -> Vec<f64> {
        match self {
            Self::Shared { values } => values.clone(),
            Self::PerCluster { values } => values.iter().flatten().copied().collect(),
        }
    }

    /// Check shape against `(k, p)` and membership of every entry in `grid`.
    pub fn validate(&self, k: usize, p: usize, grid: Option<&LambdaGrid>) -> Result<()> {
        let shape_ok = match self {
            Self::Shared { values } => values.len() == p,
            Self::PerCluster { values } => {
                values.len() == k && values.iter().all(|r| r.len() == p)
            }
        };
        if !shape_ok {
            return Err(usage(format!(
                "lambda shape does not match K={k}, p={p}"
            )));
        }
        for v in self.all_values() {
            check_lambda(v)?;
            if let Some(grid) = grid {
                if !grid.contains(v) {
                    return Err(usage(format!("lambda {v} is not on the grid")));
                }
            }
        }
        Ok(())
    }
}

/// Apply the forward transform elementwise. Per-cluster parameters need a
/// partition to know which row of `lambda` applies to each record.
pub fn transform_matrix(
    x: &DataMatrix,
    lambda: &LambdaState,
    partition: Option<&Partition>,
) -> Result<DataMatrix> {
    if lambda.n_dims() != x.n_cols() {
        return Err(usage(format!(
            "lambda has {} dimensions, data has {}",
            lambda.n_dims(),
            x.n_cols()
        )));
    }
    match lambda {
        LambdaState::Shared { values } => {
            for &v in values {
                check_lambda(v)?;
            }
            x.map_cells(|_, j, v| Ok(ihs_forward_raw(v, values[j])))
        }
        LambdaState::PerCluster { values } => {
            let partition = partition
                .ok_or_else(|| usage("per-cluster lambda requires a partition"))?;
            if partition.len() != x.n_rows() || partition.k() > values.len() {
                return Err(usage("partition does not match data and lambda shapes"));
            }
            for &v in values.iter().flatten() {
                check_lambda(v)?;
            }
            let labels = partition.labels();
            x.map_cells(|i, j, v| Ok(ihs_forward_raw(v, values[labels[i]][j])))
        }
    }
}

/// Inverse of [`transform_matrix`].
pub fn inverse_transform_matrix(
    y: &DataMatrix,
    lambda: &LambdaState,
    partition: Option<&Partition>,
) -> Result<DataMatrix> {
    if lambda.n_dims() != y.n_cols() {
        return Err(usage("lambda and data dimensions differ"));
    }
    match lambda {
        LambdaState::Shared { values } => y.map_cells(|_, j, v| ihs_inverse(v, values[j])),
        LambdaState::PerCluster { values } => {
            let partition = partition
                .ok_or_else(|| usage("per-cluster lambda requires a partition"))?;
            if partition.len() != y.n_rows() || partition.k() > values.len() {
                return Err(usage("partition does not match data and lambda shapes"));
            }
            let labels = partition.labels();
            y.map_cells(|i, j, v| ihs_inverse(v, values[labels[i]][j]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // asinh(1) = ln(1 + sqrt 2), 40-digit reference.
    const ASINH_ONE: f64 = 0.881_373_587_019_543_025_232_609_324_979_792_3;
    // -ln(2) / 2
    #[allow(clippy::excessive_precision)]
    const NEG_HALF_LN2: f64 = -0.346_573_590_279_972_654_708_616_060_729_088_3;

    #[test]
    fn forward_examples() {
        assert_eq!(ihs_forward(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(ihs_forward(2.5, 0.0).unwrap(), 2.5);
        assert!((ihs_forward(1.0, 1.0).unwrap() - ASINH_ONE).abs() < 1e-15);
        assert!((ihs_forward(1.0, 1.0).unwrap() - 0.881374).abs() < 1e-6);
    }

    #[test]
    fn forward_rejects_bad_input() {
        assert!(matches!(ihs_forward(f64::NAN, 1.0), Err(TikError::Domain(_))));
        assert!(matches!(ihs_forward(1.0, -0.5), Err(TikError::Domain(_))));
        assert!(matches!(ihs_forward(1.0, f64::INFINITY), Err(TikError::Domain(_))));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(ihs_inverse(0.0, 1.4).unwrap(), 0.0);
        assert_eq!(ihs_inverse(3.7, 0.0).unwrap(), 3.7);
        assert!((ihs_inverse(ASINH_ONE, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((ihs_inverse(0.881374, 1.0).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn inverse_overflow_is_range_error() {
        assert!(matches!(ihs_inverse(800.0, 1.0), Err(TikError::Range(_))));
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(log_jacobian_term(5.0, 0.0).unwrap(), 0.0);
        assert_eq!(log_jacobian_term(0.0, 2.0).unwrap(), 0.0);
        assert!((log_jacobian_term(1.0, 1.0).unwrap() - NEG_HALF_LN2).abs() < 1e-15);
    }

    #[test]
    fn stable_for_large_and_negative_arguments() {
        // ln(2 * 1e200) computed directly
        let big = ihs_forward(1e200, 1.0).unwrap();
        assert!((big - (2f64.ln() + 200.0 * 10f64.ln())).abs() < 1e-12);
        assert_eq!(ihs_forward(-1e200, 1.0).unwrap(), -big);
        // small s: asinh(s) ~ s - s^3/6
        let s = 1e-9;
        assert!((ihs_forward(s, 1.0).unwrap() - (s - s * s * s / 6.0)).abs() < 1e-24);
        assert!(log_jacobian_term(1e200, 1.0).unwrap().is_finite());
    }

    #[test]
    fn transform_matrix_examples() {
        let x = DataMatrix::from_rows(&[[1.0, -2.0], [3.5, 0.25]]).unwrap();
        assert_eq!(transform_matrix(&x, &LambdaState::zeros(2), None).unwrap(), x);

        let one = DataMatrix::from_rows(&[[1.0]]).unwrap();
        let t = transform_matrix(&one, &LambdaState::shared(vec![1.0]), None).unwrap();
        assert!((t.get(0, 0) - ASINH_ONE).abs() < 1e-15);

        let two = DataMatrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let lambda = LambdaState::per_cluster(vec![vec![0.0], vec![1.0]]).unwrap();
        let part = Partition::new(vec![0, 1], 2).unwrap();
        let t = transform_matrix(&two, &lambda, Some(&part)).unwrap();
        assert_eq!(t.get(0, 0), 1.0);
        assert!((t.get(1, 0) - ASINH_ONE).abs() < 1e-15);

        assert!(matches!(
            transform_matrix(&two, &lambda, None),
            Err(TikError::Usage(_))
        ));
    }

    #[test]
    fn default_grid_shape() {
        let g = LambdaGrid::default();
        assert_eq!(g.len(), 40);
        assert_eq!(g.value(0), 0.0);
        assert!((g.value(1) - 0.01).abs() < 1e-15);
        assert!((g.value(39) - 0.01 * 1.25f64.powi(38)).abs() < 1e-12);
        assert!(LambdaGrid::new(g.values().to_vec()).is_ok());
    }

    #[test]
    fn grid_validation() {
        assert!(LambdaGrid::new(vec![0.0]).is_err());
        assert!(LambdaGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(LambdaGrid::new(vec![0.0, 2.0, 1.0]).is_err());
        assert!(LambdaGrid::new(vec![0.5, 1.0]).is_err());
        assert!(LambdaGrid::new(vec![0.0, -1.0]).is_err());
    }

    #[test]
    fn grid_spec_parsing() {
        let g = LambdaGrid::parse_spec("0,0.5..2").unwrap();
        assert_eq!(g.values(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        let g = LambdaGrid::parse_spec("0,0.25..0.5; 3,10").unwrap();
        assert_eq!(g.values(), &[0.0, 0.25, 0.5, 3.0, 10.0]);
        let g = LambdaGrid::parse_spec("1, 0 ,0.5").unwrap();
        assert_eq!(g.values(), &[0.0, 0.5, 1.0]);
        assert_eq!(LambdaGrid::parse_spec("default").unwrap(), LambdaGrid::default());
        assert!(LambdaGrid::parse_spec("0,abc").is_err());
        assert!(LambdaGrid::parse_spec("0..2").is_err());
    }
}
