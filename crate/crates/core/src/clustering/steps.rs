//! Assignment, mean update and empty-cluster repair, written once against a
//! [`Space`] so the public single-space functions and the multi-space engine
//! share the same code.

use super::{Centers, Partition};
use crate::error::{usage, Result};
use crate::matrix::DataMatrix;

/// Transformed values of the records, possibly depending on the cluster whose
/// parameters are applied.
pub(crate) trait Space {
    fn n(&self) -> usize;
    fn p(&self) -> usize;
    fn value(&self, i: usize, cluster: usize, j: usize) -> f64;
}

/// An already-transformed matrix; the cluster argument is ignored.
pub(crate) struct Plain<'a>(pub &'a DataMatrix);

impl Space for Plain<'_> {
    fn n(&self) -> usize {
        self.0.n_rows()
    }

    fn p(&self) -> usize {
        self.0.n_cols()
    }

    #[inline]
    fn value(&self, i: usize, _cluster: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

#[inline]
pub(crate) fn sq_dist<S: Space>(space: &S, i: usize, cluster: usize, center: &[f64]) -> f64 {
    center
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let d = space.value(i, cluster, j) - c;
            d * d
        })
        .sum()
}

/// Per-cluster means (row-major `k x p`) and member counts. Empty clusters get
/// a zero row.
pub(crate) fn cluster_means<S: Space>(space: &S, labels: &[usize], k: usize) -> (Vec<f64>, Vec<usize>) {
    let p = space.p();
    let mut sums = vec![0.0; k * p];
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for j in 0..p {
            sums[c * p + j] += space.value(i, c, j);
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = counts[c] as f64;
            for s in &mut sums[c * p..(c + 1) * p] {
                *s /= inv;
            }
        }
    }
    (sums, counts)
}

/// Nearest-center assignment. `extra(i, c)` adds a cluster-specific cost and
/// `scale` multiplies the squared distance. Ties go to the lowest cluster index.
pub(crate) fn assign_with<S, F>(space: &S, centers: &[f64], k: usize, scale: f64, extra: F) -> Vec<usize>
where
    S: Space,
    F: Fn(usize, usize) -> f64,
{
    let p = space.p();
    (0..space.n())
        .map(|i| {
            let mut best = 0;
            let mut best_cost = f64::INFINITY;
            for c in 0..k {
                let cost = scale * sq_dist(space, i, c, &centers[c * p..(c + 1) * p]) + extra(i, c);
                if cost < best_cost {
                    best_cost = cost;
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Reseed every empty cluster at the record farthest from its own cluster
/// mean, taking it away from its donor cluster. Returns true if anything moved.
///
/// `means` and `counts` must describe `labels` on entry and are kept in sync.
pub(crate) fn repair_empty<S: Space>(
    space: &S,
    labels: &mut [usize],
    k: usize,
    means: &mut Vec<f64>,
    counts: &mut Vec<usize>,
) -> bool {
    let p = space.p();
    let mut repaired = false;
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_dist = f64::NEG_INFINITY;
        for (i, &c) in labels.iter().enumerate() {
            if counts[c] < 2 {
                continue;
            }
            let d = sq_dist(space, i, c, &means[c * p..(c + 1) * p]);
            if d > far_dist {
                far_dist = d;
                far = Some(i);
            }
        }
        let Some(i) = far else {
            // fewer records than clusters; nothing to donate
            break;
        };
        labels[i] = empty;
        let (m, cnt) = cluster_means(space, labels, k);
        *means = m;
        *counts = cnt;
        repaired = true;
    }
    repaired
}

/// Assign each row of an already-transformed matrix to its nearest center.
pub fn assign_step(x_transformed: &DataMatrix, centers: &Centers) -> Result<Partition> {
    if centers.n_cols() != x_transformed.n_cols() {
        return Err(usage(format!(
            "centers have {} columns, data has {}",
            centers.n_cols(),
            x_transformed.n_cols()
        )));
    }
    let k = centers.n_rows();
    let labels = assign_with(&Plain(x_transformed), centers.as_slice(), k, 1.0, |_, _| 0.0);
    Ok(Partition::from_raw(labels, k))
}

/// Recompute cluster means; empty clusters are repaired by farthest-point
/// reseeding, which may relabel records of `partition`. Returns the means and
/// whether a repair happened.
pub fn update_centers(x_transformed: &DataMatrix, partition: &mut Partition) -> Result<(Centers, bool)> {
    let k = partition.k();
    if partition.len() != x_transformed.n_rows() {
        return Err(usage("partition length does not match the data"));
    }
    if x_transformed.n_rows() < k {
        return Err(usage("fewer records than clusters"));
    }
    let space = Plain(x_transformed);
    let mut labels = partition.labels().to_vec();
    let (mut means, mut counts) = cluster_means(&space, &labels, k);
    let repaired = repair_empty(&space, &mut labels, k, &mut means, &mut counts);
    *partition = Partition::from_raw(labels, k);
    Ok((DataMatrix::new(k, x_transformed.n_cols(), means)?, repaired))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> DataMatrix {
        DataMatrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let x = col(&[1.0]);
        let centers = col(&[0.0, 2.0]);
        assert_eq!(assign_step(&x, &centers).unwrap().labels(), &[0]);
    }

    #[test]
    fn single_center_takes_everything() {
        let x = col(&[-3.0, 0.0, 8.0]);
        let centers = col(&[100.0]);
        assert_eq!(assign_step(&x, &centers).unwrap().labels(), &[0, 0, 0]);
    }

    #[test]
    fn nearest_center_matches_brute_force() {
        let x = col(&[0.0, 0.1, 10.0, 10.1]);
        let centers = col(&[0.05, 10.05]);
        let got = assign_step(&x, &centers).unwrap();
        let brute: Vec<usize> = [0.0f64, 0.1, 10.0, 10.1]
            .iter()
            .map(|v| if (v - 0.05).abs() <= (v - 10.05).abs() { 0 } else { 1 })
            .collect();
        assert_eq!(got.labels(), brute.as_slice());
        assert_eq!(got.one_based(), vec![1, 1, 2, 2]);
    }

    #[test]
    fn means_update() {
        let x = col(&[1.0, 3.0]);
        let mut part = Partition::new(vec![0, 0], 1).unwrap();
        let (c, repaired) = update_centers(&x, &mut part).unwrap();
        assert_eq!(c.as_slice(), &[2.0]);
        assert!(!repaired);

        let x = DataMatrix::from_rows(&[[0.0, 0.0], [4.0, 6.0]]).unwrap();
        let mut part = Partition::new(vec![0, 1], 2).unwrap();
        let (c, _) = update_centers(&x, &mut part).unwrap();
        assert_eq!(c.to_rows(), vec![vec![0.0, 0.0], vec![4.0, 6.0]]);
    }

    #[test]
    fn empty_cluster_reseeded_at_farthest_point() {
        // mean of {0, 1, 10} is 11/3; 10 is farthest (6.33 vs 3.67 and 2.67)
        let x = col(&[0.0, 1.0, 10.0]);
        let mut part = Partition::new(vec![0, 0, 0], 2).unwrap();
        let (c, repaired) = update_centers(&x, &mut part).unwrap();
        assert!(repaired);
        assert_eq!(part.labels(), &[0, 0, 1]);
        assert_eq!(c.as_slice(), &[0.5, 10.0]);
    }
}
