use serde::{Deserialize, Serialize};

use super::Partition;
use crate::error::{usage, Result};
use crate::matrix::DataMatrix;
use crate::transform::{log_jacobian_term, transform_matrix, LambdaState};

/// Components of the penalized objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// `(n p / 2) ln(wss) + penalty`; negative infinity when `wss == 0`.
    pub value: f64,
    /// Within-cluster sum of squares in transformed space.
    pub wss: f64,
    /// `0.5 * sum ln(lambda^2 x^2 + 1)` over every cell, with each record's
    /// parameters taken from its cluster.
    pub penalty: f64,
    pub degenerate: bool,
}

/// Evaluate the objective by transforming the data, recomputing cluster means
/// and summing the Jacobian penalty cell by cell. Lower is better.
pub fn evaluate_objective(
    x: &DataMatrix,
    partition: &Partition,
    lambda: &LambdaState,
) -> Result<f64> {
    objective_breakdown(x, partition, lambda).map(|b| b.value)
}

pub fn objective_breakdown(
    x: &DataMatrix,
    partition: &Partition,
    lambda: &LambdaState,
) -> Result<ObjectiveBreakdown> {
    let (n, p, k) = (x.n_rows(), x.n_cols(), partition.k());
    if partition.len() != n {
        return Err(usage(format!(
            "partition has {} labels for {n} records",
            partition.len()
        )));
    }
    lambda.validate(k, p, None)?;

    let y = transform_matrix(x, lambda, Some(partition))?;
    let labels = partition.labels();

    let mut sums = vec![0.0; k * p];
    let mut counts = vec![0usize; k];
    for (i, row) in y.rows().enumerate() {
        counts[labels[i]] += 1;
        for (s, v) in sums[labels[i] * p..(labels[i] + 1) * p].iter_mut().zip(row) {
            *s += v;
        }
    }
    let means: Vec<f64> = sums
        .iter()
        .enumerate()
        .map(|(c, s)| if counts[c / p] > 0 { s / counts[c / p] as f64 } else { 0.0 })
        .collect();

    let mut wss = 0.0;
    let mut penalty = 0.0;
    for (i, row) in y.rows().enumerate() {
        let c = labels[i];
        for j in 0..p {
            let d = row[j] - means[c * p + j];
            wss += d * d;
            penalty -= log_jacobian_term(x.get(i, j), lambda.get(c, j))?;
        }
    }

    let degenerate = wss == 0.0;
    let value = if degenerate {
        f64::NEG_INFINITY
    } else {
        0.5 * (n * p) as f64 * wss.ln() + penalty
    };
    Ok(ObjectiveBreakdown {
        value,
        wss,
        penalty,
        degenerate,
    })
}
