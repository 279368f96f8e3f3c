//! External agreement between clusterings and raw scatter.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::clustering::Partition;
use crate::error::{usage, Result};
use crate::matrix::DataMatrix;

#[inline]
fn choose2(m: u64) -> u128 {
    let m = u128::from(m);
    m * m.saturating_sub(1) / 2
}

/// Dense codes in order of first appearance, plus the distinct values.
fn encode<T: Eq + Hash + Clone>(labels: &[T]) -> (Vec<usize>, Vec<T>) {
    let mut index = HashMap::new();
    let mut distinct = Vec::new();
    let codes = labels
        .iter()
        .map(|l| {
            *index.entry(l.clone()).or_insert_with(|| {
                distinct.push(l.clone());
                distinct.len() - 1
            })
        })
        .collect();
    (codes, distinct)
}

fn contingency(a: &[usize], ra: usize, b: &[usize], rb: usize) -> Vec<Vec<u64>> {
    let mut table = vec![vec![0u64; rb]; ra];
    for (&i, &j) in a.iter().zip(b) {
        table[i][j] += 1;
    }
    table
}

/// Adjusted Rand index under the permutation model. Labels may be any
/// hashable values; only the induced partitions matter.
///
/// When both partitions make the expected index equal its maximum (for
/// example both all-in-one), the result is 1 for identical partitions and 0
/// otherwise.
pub fn adjusted_rand_index<T: Eq + Hash + Clone>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(usage(format!(
            "label vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(usage("adjusted Rand index needs at least 2 observations"));
    }
    let (ca, da) = encode(a);
    let (cb, db) = encode(b);
    let table = contingency(&ca, da.len(), &cb, db.len());

    // exact integer pair counts; the ratio is rounded once
    let index: u128 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: u128 = table.iter().map(|row| choose2(row.iter().sum())).sum();
    let sum_b: u128 = (0..db.len())
        .map(|j| choose2(table.iter().map(|row| row[j]).sum()))
        .sum();
    let pairs = choose2(n as u64);
    // both scaled by 2 * pairs: 2 (index - expected) and 2 (max - expected)
    let num = 2 * (index * pairs) as i128 - 2 * (sum_a * sum_b) as i128;
    let den = ((sum_a + sum_b) * pairs) as i128 - 2 * (sum_a * sum_b) as i128;
    if den == 0 {
        return Ok(if ca == cb { 1.0 } else { 0.0 });
    }
    Ok(num as f64 / den as f64)
}

/// ARI between two partitions.
pub fn partition_ari(a: &Partition, b: &Partition) -> Result<f64> {
    adjusted_rand_index(a.labels(), b.labels())
}

/// Cross-tabulation of reference classes (rows) against estimated clusters
/// (columns), both in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn new<R, E>(reference: &[R], estimated: &[E]) -> Result<Self>
    where
        R: Eq + Hash + Clone + ToString,
        E: Eq + Hash + Clone + ToString,
    {
        if reference.len() != estimated.len() {
            return Err(usage(format!(
                "label vectors differ in length: {} vs {}",
                reference.len(),
                estimated.len()
            )));
        }
        let (cr, dr) = encode(reference);
        let (ce, de) = encode(estimated);
        Ok(Self {
            counts: contingency(&cr, dr.len(), &ce, de.len()),
            row_names: dr.iter().map(ToString::to_string).collect(),
            col_names: de.iter().map(ToString::to_string).collect(),
        })
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.col_names.len())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("reference");
        for c in &self.col_names {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (name, row) in self.row_names.iter().zip(&self.counts) {
            out.push_str(name);
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let first = self
            .row_names
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0);
        let width = self
            .col_names
            .iter()
            .map(String::len)
            .chain(self.counts.iter().flatten().map(|v| v.to_string().len()))
            .max()
            .unwrap_or(1);
        write!(f, "{:first$}", "")?;
        for c in &self.col_names {
            write!(f, " {c:>width$}")?;
        }
        writeln!(f)?;
        for (name, row) in self.row_names.iter().zip(&self.counts) {
            write!(f, "{name:<first$}")?;
            for v in row {
                write!(f, " {v:>width$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn confusion_matrix<R, E>(reference: &[R], estimated: &[E]) -> Result<ConfusionMatrix>
where
    R: Eq + Hash + Clone + ToString,
    E: Eq + Hash + Clone + ToString,
{
    ConfusionMatrix::new(reference, estimated)
}

/// Within-cluster sum of squared Euclidean distances to the cluster means.
pub fn wss(x: &DataMatrix, partition: &Partition) -> Result<f64> {
    if partition.len() != x.n_rows() {
        return Err(usage("partition length does not match the data"));
    }
    let (k, p) = (partition.k(), x.n_cols());
    let mut sums = vec![0.0; k * p];
    let mut counts = vec![0usize; k];
    for (row, &c) in x.rows().zip(partition.labels()) {
        counts[c] += 1;
        for (s, v) in sums[c * p..(c + 1) * p].iter_mut().zip(row) {
            *s += v;
        }
    }
    let mut total = 0.0;
    for (row, &c) in x.rows().zip(partition.labels()) {
        let n = counts[c] as f64;
        for (j, v) in row.iter().enumerate() {
            let d = v - sums[c * p + j] / n;
            total += d * d;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pair-counting reference: ARI from the 2x2 pair agreement table.
    fn pair_oracle(a: &[u8], b: &[u8]) -> f64 {
        let n = a.len();
        let (mut ss, mut sd, mut ds, mut dd) = (0f64, 0f64, 0f64, 0f64);
        for i in 0..n {
            for j in i + 1..n {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => ss += 1.0,
                    (true, false) => sd += 1.0,
                    (false, true) => ds += 1.0,
                    (false, false) => dd += 1.0,
                }
            }
        }
        let total = ss + sd + ds + dd;
        let (pa, pb) = (ss + sd, ss + ds);
        let expected = pa * pb / total;
        let max = 0.5 * (pa + pb);
        if max == expected {
            return if ss + dd == total { 1.0 } else { 0.0 };
        }
        (ss - expected) / (max - expected)
    }

    #[test]
    fn identical_is_one() {
        let a = [1, 1, 2, 3, 3];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        let relabeled = ["x", "x", "y", "z", "z"];
        let b: Vec<String> = relabeled.iter().map(|s| s.to_string()).collect();
        let a: Vec<String> = a.iter().map(|v| v.to_string()).collect();
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn crossed_pairs() {
        let v = adjusted_rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap();
        assert_eq!(v, -0.5);
        assert!((pair_oracle(&[1, 1, 2, 2], &[1, 2, 1, 2]) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn singletons_against_one_cluster() {
        let v = adjusted_rand_index(&[1, 2, 3, 4], &[1, 1, 1, 1]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ari_errors() {
        assert!(adjusted_rand_index(&[1, 2], &[1]).is_err());
        assert!(adjusted_rand_index(&[1], &[1]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let m = confusion_matrix(&["A", "A", "B"], &[1, 1, 2]).unwrap();
        assert_eq!(m.counts, vec![vec![2, 0], vec![0, 1]]);
        let m = confusion_matrix(&["A", "B"], &[1, 1]).unwrap();
        assert_eq!(m.counts, vec![vec![1], vec![1]]);
        assert_eq!(m.to_csv(), "reference,1\nA,1\nB,1\n");
        assert!(confusion_matrix(&["A"], &[1, 2]).is_err());
    }

    #[test]
    fn confusion_renders_aligned() {
        let m = confusion_matrix(&["setosa", "virginica", "virginica"], &[1, 2, 2]).unwrap();
        let text = m.to_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.len() == lines[0].len()));
    }

    #[test]
    fn wss_examples() {
        let x = DataMatrix::new(2, 1, vec![0.0, 2.0]).unwrap();
        assert_eq!(wss(&x, &Partition::new(vec![0, 0], 1).unwrap()).unwrap(), 2.0);
        assert_eq!(wss(&x, &Partition::new(vec![0, 1], 2).unwrap()).unwrap(), 0.0);
    }

    fn labels(n: usize) -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..4, n)
    }

    proptest! {
        #[test]
        fn ari_symmetric_and_matches_oracle((a, b) in (2usize..30).prop_flat_map(|n| (labels(n), labels(n)))) {
            let ab = adjusted_rand_index(&a, &b).unwrap();
            prop_assert_eq!(ab, adjusted_rand_index(&b, &a).unwrap());
            prop_assert!(ab <= 1.0);
            prop_assert!((ab - pair_oracle(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn ari_label_invariant(
            (a, b) in (2usize..30).prop_flat_map(|n| (labels(n), labels(n))),
            perm in Just([0u8, 1, 2, 3]).prop_shuffle(),
        ) {
            let relabeled: Vec<u8> = a.iter().map(|&l| perm[l as usize] + 10).collect();
            prop_assert_eq!(
                adjusted_rand_index(&a, &b).unwrap(),
                adjusted_rand_index(&relabeled, &b).unwrap()
            );
        }

        #[test]
        fn confusion_margins((a, b) in (1usize..40).prop_flat_map(|n| (labels(n), labels(n)))) {
            let m = confusion_matrix(&a, &b).unwrap();
            prop_assert_eq!(m.n(), a.len() as u64);
            let (_, ra) = encode(&a);
            let expect_rows: Vec<u64> = ra.iter().map(|r| a.iter().filter(|&&v| v == *r).count() as u64).collect();
            prop_assert_eq!(m.row_sums(), expect_rows);
            let (_, rb) = encode(&b);
            let expect_cols: Vec<u64> = rb.iter().map(|r| b.iter().filter(|&&v| v == *r).count() as u64).collect();
            prop_assert_eq!(m.col_sums(), expect_cols);
        }

        #[test]
        fn wss_invariant_under_reordering(
            rows in prop::collection::vec((-50.0f64..50.0, 0usize..3), 3..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let x = DataMatrix::new(rows.len(), 1, rows.iter().map(|r| r.0).collect()).unwrap();
            let part = Partition::new(rows.iter().map(|r| r.1).collect(), 3).unwrap();
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let xs = DataMatrix::new(rows.len(), 1, shuffled.iter().map(|r| r.0).collect()).unwrap();
            let ps = Partition::new(shuffled.iter().map(|r| r.1).collect(), 3).unwrap();
            let a = wss(&x, &part).unwrap();
            let b = wss(&xs, &ps).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
