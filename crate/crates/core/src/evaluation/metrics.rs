//! Test-set metrics and their aggregation across runs.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;

/// Mann-Whitney AUROC: `(#(pos > neg) + 0.5 #(pos = neg)) / (n_pos n_neg)`.
/// `None` when either class is absent.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut n_pos, mut n_neg) = (0u64, 0u64);
    // twice the pair statistic, kept in integers so ties count exactly
    let mut twice = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut p, mut q) = (0u64, 0u64);
        while j < order.len() && scores[order[j]].total_cmp(&scores[order[i]]).is_eq() {
            if labels[order[j]] {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        twice += 2 * p * n_neg + p * q;
        n_pos += p;
        n_neg += q;
        i = j;
    }
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    Some(twice as f64 / (2 * n_pos * n_neg) as f64)
}

pub fn accuracy(preds: &[bool], labels: &[bool]) -> f64 {
    assert_eq!(preds.len(), labels.len(), "predictions and labels differ in length");
    if preds.is_empty() {
        return 0.0;
    }
    preds.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / preds.len() as f64
}

/// F1 of one class; `(0.0, true)` when precision and recall are both 0/0.
pub fn class_f1(preds: &[bool], labels: &[bool], class: bool) -> (f64, bool) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &l) in preds.iter().zip(labels) {
        match (p == class, l == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        (0.0, true)
    } else {
        (2.0 * tp as f64 / denom as f64, false)
    }
}

/// Unweighted mean of the two per-class F1 scores.
pub fn macro_f1(preds: &[bool], labels: &[bool]) -> f64 {
    assert_eq!(preds.len(), labels.len(), "predictions and labels differ in length");
    0.5 * (class_f1(preds, labels, true).0 + class_f1(preds, labels, false).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    Auroc,
    Accuracy,
    MacroF1,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Auroc, Metric::Accuracy, Metric::MacroF1];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Auroc => "AUROC",
            Metric::Accuracy => "Accuracy",
            Metric::MacroF1 => "MacroF1",
        }
    }
}

/// Normal-approximation 95% interval over per-run values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_run: Vec<f64>,
    pub mean: f64,
    /// `1.96 * sample_sd / sqrt(runs)`; zero for a single run.
    pub ci_half_width: f64,
}

impl MetricSummary {
    pub fn from_runs(per_run: Vec<f64>) -> Self {
        let n = per_run.len();
        let mean = math::mean(&per_run);
        let ci_half_width = if n < 2 { 0.0 } else { 1.96 * math::sample_std(&per_run) / math::sqrt(n as f64) };
        MetricSummary { per_run, mean, ci_half_width }
    }

    pub fn n_runs(&self) -> usize {
        self.per_run.len()
    }
}
