//! Fixed-length participant summaries from variable-length series.

mod hmm;

pub use hmm::{fit_hmm, hmm_dynamics, state_dynamics, viterbi, HmmConfig, HmmModel};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::matrix::Matrix;

/// Quantile levels of the rPPG beats-per-minute series.
pub const HRV_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SummaryKind {
    Stats,
    Quantiles,
    HmmDynamics,
    Raw,
}

/// Per-channel means followed by per-channel population standard deviations.
pub fn pool_stats(series: &Matrix) -> Vec<f64> {
    let d = series.cols();
    let mut out = Vec::with_capacity(2 * d);
    let cols: Vec<Vec<f64>> = (0..d).map(|j| series.column(j)).collect();
    out.extend(cols.iter().map(|c| math::mean(c)));
    out.extend(cols.iter().map(|c| math::population_std(c)));
    out
}

/// Quantile of sorted values by linear interpolation at position `p (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = math::floor(pos) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Channel-major quantiles: all levels of channel 0, then channel 1, ...
pub fn pool_quantiles(series: &Matrix, probs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.cols() * probs.len());
    for j in 0..series.cols() {
        let mut c = series.column(j);
        c.sort_by(f64::total_cmp);
        out.extend(probs.iter().map(|&p| quantile_sorted(&c, p)));
    }
    out
}

/// Nearest-index uniform resampling to `target_len` rows.
pub fn resample_uniform(series: &Matrix, target_len: usize) -> Matrix {
    let t = series.rows();
    let mut out = Matrix::zeros(target_len, series.cols());
    for i in 0..target_len {
        let src = if target_len == 1 {
            0
        } else {
            math::round(i as f64 * (t - 1) as f64 / (target_len - 1) as f64) as usize
        };
        out.row_mut(i).copy_from_slice(series.row(src.min(t - 1)));
    }
    out
}
