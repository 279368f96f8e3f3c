//! Choosing the number of clusters with the jump statistic.
//!
//! For a distortion sequence `d_1..d_Kmax` and exponent `eta`,
//! `J_k = d_k^(-eta) - d_(k-1)^(-eta)` with `d_0^(-eta) = 0`. The classic
//! distortion is `WSS_k / (n p)`; for transformed fits the minimized objective
//! itself plays that role. The selected K is the one that maximizes `J_k` for
//! the most exponents in a sweep.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans_fit, tikmeans_fit, LambdaMode, RunConfig};
use crate::error::{usage, Result};
use crate::matrix::DataMatrix;

/// Largest K considered without a hint.
pub const KMAX_CAP: usize = 20;

/// `min(2 * hint + 1, 20)`, or 20 without a hint.
pub fn kmax_default(k_true_hint: Option<usize>) -> usize {
    k_true_hint.map_or(KMAX_CAP, |h| (2 * h + 1).min(KMAX_CAP))
}

/// The customary exponent for the classic statistic, `p / 2`.
pub fn classic_eta(p: usize) -> f64 {
    p as f64 / 2.0
}

/// 200 evenly spaced exponents on `[-10, -0.05]` and 200 on `[0.05, 10]`.
pub fn default_eta_grid() -> Vec<f64> {
    let half = |lo: f64, hi: f64| {
        (0..200).map(move |i| {
            let t = i as f64 / 199.0;
            lo * (1.0 - t) + hi * t
        })
    };
    half(-10.0, -0.05).chain(half(0.05, 10.0)).collect()
}

fn check_k(x: &DataMatrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(usage("K must be at least 1"));
    }
    if k > x.n_rows() {
        return Err(usage(format!("K={k} exceeds n={}", x.n_rows())));
    }
    Ok(())
}

/// `WSS_K / (n p)` of the best K-means fit over `config.n_starts` starts.
/// `K == n` gives 0 without fitting.
pub fn kmeans_distortion(x: &DataMatrix, k: usize, config: &RunConfig) -> Result<f64> {
    check_k(x, k)?;
    if k == x.n_rows() {
        return Ok(0.0);
    }
    let model = kmeans_fit(x, k, config.n_starts, config.max_iter, config.seed)?;
    Ok(model.wss / (x.n_rows() * x.n_cols()) as f64)
}

/// Best objective of a transformed fit with `K` clusters. Not monotone in K.
pub fn tik_distortion(x: &DataMatrix, k: usize, config: &RunConfig) -> Result<f64> {
    check_k(x, k)?;
    Ok(tikmeans_fit(x, &config.clone().with_k(k))?.objective)
}

/// Shift so every distortion is positive. Identity when they already are.
pub fn positivity_adjust(distortions: &[f64]) -> Vec<f64> {
    let min = distortions.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        return distortions.to_vec();
    }
    let max = distortions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let eps = if range > 0.0 { 1e-6 * range } else { 1e-6 };
    distortions.iter().map(|d| d - min + eps).collect()
}

fn check_jump_inputs(distortions: &[f64], eta: f64) -> Result<()> {
    if eta == 0.0 || !eta.is_finite() {
        return Err(usage(format!("eta must be finite and non-zero, got {eta}")));
    }
    if distortions.is_empty() {
        return Err(usage("no distortions given"));
    }
    if distortions.iter().any(|d| !d.is_finite()) {
        return Err(usage("distortions must be finite"));
    }
    Ok(())
}

fn jumps(adjusted: &[f64], eta: f64) -> Vec<f64> {
    let mut prev = 0.0;
    adjusted
        .iter()
        .map(|d| {
            let cur = d.powf(-eta);
            let j = cur - prev;
            prev = cur;
            j
        })
        .collect()
}

/// `J_1..J_Kmax` for distortions `d_1..d_Kmax` (index 0 holds K = 1).
pub fn jump_statistics(distortions: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_jump_inputs(distortions, eta)?;
    Ok(jumps(&positivity_adjust(distortions), eta))
}

/// K (1-based) maximizing the jump statistic; ties go to the smaller K.
///
/// Distortions are divided by their maximum first. That scales every `J_k`
/// by the same positive factor, so the argmax is unchanged while overflow is
/// avoided.
pub fn jump_argmax(distortions: &[f64], eta: f64) -> Result<usize> {
    check_jump_inputs(distortions, eta)?;
    let adjusted = positivity_adjust(distortions);
    let max = adjusted.iter().copied().fold(0.0, f64::max);
    let normalized: Vec<f64> = adjusted.iter().map(|d| d / max).collect();
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (k, j) in jumps(&normalized, eta).into_iter().enumerate() {
        if j > best_val {
            best_val = j;
            best = k;
        }
    }
    Ok(best + 1)
}

struct Tally {
    selected_k: usize,
    support: Vec<usize>,
    longest_run: Vec<usize>,
    fallback: bool,
}

/// Count how often each K was chosen and pick the best-supported K strictly
/// between 1 and `kmax`, ties to the smaller K.
fn tally_choices(argmax_table: &[usize], kmax: usize) -> Tally {
    let mut support = vec![0; kmax];
    let mut longest_run = vec![0; kmax];
    let mut run = 0;
    for (i, &k) in argmax_table.iter().enumerate() {
        support[k - 1] += 1;
        run = if i > 0 && argmax_table[i - 1] == k { run + 1 } else { 1 };
        longest_run[k - 1] = longest_run[k - 1].max(run);
    }
    let most = |range: std::ops::Range<usize>| {
        range
            .filter(|&i| support[i] > 0)
            .fold(None::<usize>, |best, i| match best {
                Some(b) if support[b] >= support[i] => Some(b),
                _ => Some(i),
            })
    };
    let (selected, fallback) = match most(1..kmax - 1) {
        Some(i) => (i, false),
        None => (most(0..kmax).expect("non-empty table"), true),
    };
    Tally {
        selected_k: selected + 1,
        support,
        longest_run,
        fallback,
    }
}

/// Outcome of a jump-statistic sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpProfile {
    pub k_values: Vec<usize>,
    pub distortions: Vec<f64>,
    pub eta_grid: Vec<f64>,
    /// Chosen K for each exponent, aligned with `eta_grid`.
    pub argmax_table: Vec<usize>,
    pub selected_k: usize,
    /// Number of exponents choosing each K, aligned with `k_values`.
    pub support: Vec<usize>,
    /// Longest run of consecutive exponents choosing each K.
    pub longest_run: Vec<usize>,
    /// No K strictly between 1 and K_max was ever chosen; `selected_k` is the
    /// overall most frequent choice instead.
    pub fallback: bool,
}

impl JumpProfile {
    /// Sweep `eta_grid` over precomputed distortions `d_1..d_Kmax`.
    pub fn from_distortions(distortions: Vec<f64>, eta_grid: Vec<f64>) -> Result<Self> {
        let kmax = distortions.len();
        if kmax < 2 {
            return Err(usage("K_max must be at least 2"));
        }
        if eta_grid.is_empty() {
            return Err(usage("eta grid is empty"));
        }
        let argmax_table = eta_grid
            .iter()
            .map(|&eta| jump_argmax(&distortions, eta))
            .collect::<Result<Vec<_>>>()?;

        let tally = tally_choices(&argmax_table, kmax);

        Ok(Self {
            k_values: (1..=kmax).collect(),
            distortions,
            eta_grid,
            argmax_table,
            selected_k: tally.selected_k,
            support: tally.support,
            longest_run: tally.longest_run,
            fallback: tally.fallback,
        })
    }

    /// `eta,chosen_k` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta,chosen_k\n");
        for (eta, k) in self.eta_grid.iter().zip(&self.argmax_table) {
            let _ = writeln!(out, "{eta:?},{k}");
        }
        out
    }

    /// `k,distortion,support,longest_run` rows.
    pub fn distortions_csv(&self) -> String {
        let mut out = String::from("k,distortion,support,longest_run\n");
        for i in 0..self.k_values.len() {
            let _ = writeln!(
                out,
                "{},{:?},{},{}",
                self.k_values[i], self.distortions[i], self.support[i], self.longest_run[i]
            );
        }
        out
    }

    /// Standalone SVG of the chosen K against the exponent.
    pub fn to_svg(&self) -> String {
        let (w, h) = (640.0, 400.0);
        let (left, right, top, bottom) = (56.0, 20.0, 30.0, 48.0);
        let (pw, ph) = (w - left - right, h - top - bottom);
        let eta_min = self.eta_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let eta_max = self.eta_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if eta_max > eta_min { eta_max - eta_min } else { 1.0 };
        let kmax = self.k_values.len() as f64;
        let sx = |eta: f64| left + (eta - eta_min) / span * pw;
        let sy = |k: f64| top + ph - (k - 0.5) / kmax * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="18" text-anchor="middle">jump selection: selected K = {}</text>"#,
            w / 2.0,
            self.selected_k
        );
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{y}" x2="{x}" y2="{y}" stroke="black"/>"#,
            y = top + ph,
            x = left + pw
        );
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
            top + ph
        );
        for k in &self.k_values {
            let y = sy(*k as f64);
            let _ = writeln!(
                s,
                r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{k}</text>"##,
                left + pw,
                left - 6.0,
                y + 4.0
            );
        }
        for i in 0..=4 {
            let eta = eta_min + span * i as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{eta:.2}</text>"#,
                sx(eta),
                top + ph + 16.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">eta</text>"#,
            left + pw / 2.0,
            h - 8.0
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">argmax K</text>"#,
            top + ph / 2.0,
            top + ph / 2.0
        );
        for (eta, k) in self.eta_grid.iter().zip(&self.argmax_table) {
            let fill = if *k == self.selected_k { "#c0392b" } else { "#2c3e50" };
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{fill}"/>"#,
                sx(*eta),
                sy(*k as f64)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn per_k_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64).wrapping_mul(0xd6e8_feb8_6659_fd93)
}

/// Distortions for K = 1..=kmax. Plain K-means (`LambdaMode::None`) uses
/// `WSS / (n p)`; transformed modes use the fitted objective. Each K gets its
/// own seed derived from `config.seed`.
pub fn distortion_profile(x: &DataMatrix, kmax: usize, config: &RunConfig) -> Result<Vec<f64>> {
    if kmax >= x.n_rows() {
        return Err(usage(format!(
            "K_max={kmax} needs more than {} records",
            x.n_rows()
        )));
    }
    (1..=kmax)
        .into_par_iter()
        .map(|k| {
            let cfg = config.clone().with_k(k).with_seed(per_k_seed(config.seed, k));
            match config.lambda_mode {
                LambdaMode::None => kmeans_distortion(x, k, &cfg),
                _ => tik_distortion(x, k, &cfg),
            }
        })
        .collect()
}

/// Fit every K in `1..=kmax` once, sweep the exponents and select K.
pub fn jump_selection(
    x: &DataMatrix,
    kmax: usize,
    eta_grid: &[f64],
    config: &RunConfig,
) -> Result<JumpProfile> {
    if kmax < 2 {
        return Err(usage("K_max must be at least 2"));
    }
    if eta_grid.is_empty() || eta_grid.iter().any(|&e| e == 0.0 || !e.is_finite()) {
        return Err(usage("eta grid must be non-empty, finite and exclude 0"));
    }
    config.validate()?;
    let distortions = distortion_profile(x, kmax, config)?;
    JumpProfile::from_distortions(distortions, eta_grid.to_vec())
}
