//! Group rates, equalized-odds and demographic-parity ratios, the
//! four-fifths rule, and per-group threshold mitigation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evaluation::class_f1;

/// Ratios at or above this value pass the four-fifths rule.
pub const FOUR_FIFTHS: f64 = 0.8;

pub fn four_fifths(ratio: f64) -> bool {
    ratio >= FOUR_FIFTHS
}

/// Confusion-derived rates of one group; `None` marks a zero denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub n: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub tp: usize,
    pub fp: usize,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub selection_rate: Option<f64>,
}

impl Rates {
    fn from_counts(n_pos: usize, n_neg: usize, tp: usize, fp: usize) -> Self {
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        Rates {
            n: n_pos + n_neg,
            n_pos,
            n_neg,
            tp,
            fp,
            tpr: ratio(tp, n_pos),
            fpr: ratio(fp, n_neg),
            selection_rate: ratio(tp + fp, n_pos + n_neg),
        }
    }

    /// Mean of TPR and TNR, if both are defined.
    pub fn balanced_accuracy(&self) -> Option<f64> {
        Some(0.5 * (self.tpr? + 1.0 - self.fpr?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub groups: BTreeMap<String, Rates>,
}

/// Per-group rates of hard predictions. Needs at least two non-empty groups.
pub fn group_rates<S: AsRef<str>>(preds: &[bool], labels: &[bool], groups: &[S]) -> Result<GroupRates> {
    if preds.len() != labels.len() || preds.len() != groups.len() {
        return Err(invalid("predictions, labels and groups differ in length"));
    }
    let mut counts: BTreeMap<String, [usize; 4]> = BTreeMap::new();
    for ((&p, &y), g) in preds.iter().zip(labels).zip(groups) {
        let c = counts.entry(g.as_ref().to_string()).or_default();
        c[usize::from(y)] += 1;
        if p {
            c[2 + usize::from(y)] += 1;
        }
    }
    if counts.len() < 2 {
        return Err(Error::FairnessUndefined(format!(
            "need at least two non-empty groups, found {}",
            counts.len()
        )));
    }
    let groups = counts.into_iter().map(|(g, [neg, pos, fp, tp])| (g, Rates::from_counts(pos, neg, tp, fp))).collect();
    Ok(GroupRates { groups })
}

/// A fairness ratio with the reason it is missing, if it is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: Option<f64>,
    /// A 0/0 ratio was read as "no disparity".
    pub zero_over_zero: bool,
    pub reason: Option<String>,
}

impl Ratio {
    fn na(reason: String) -> Self {
        Ratio { value: None, zero_over_zero: false, reason: Some(reason) }
    }

    pub fn fair(&self) -> Option<bool> {
        self.value.map(four_fifths)
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Demographic parity ratio: lowest over highest selection rate.
pub fn dpr(rates: &GroupRates) -> Ratio {
    let (lo, hi) = min_max(rates.groups.values().filter_map(|r| r.selection_rate));
    if hi <= 0.0 {
        return Ratio::na("no group has a positive prediction".into());
    }
    Ratio { value: Some(lo / hi), zero_over_zero: false, reason: None }
}

/// Equalized odds ratio: the smaller of the TPR and FPR min/max ratios.
pub fn eor(rates: &GroupRates) -> Ratio {
    for (g, r) in &rates.groups {
        if r.tpr.is_none() {
            return Ratio::na(format!("group {g} has no positive labels"));
        }
        if r.fpr.is_none() {
            return Ratio::na(format!("group {g} has no negative labels"));
        }
    }
    let mut flagged = false;
    let mut ratio = |vals: (f64, f64)| {
        let (lo, hi) = vals;
        if hi == 0.0 {
            flagged = true;
            1.0
        } else {
            lo / hi
        }
    };
    let t = ratio(min_max(rates.groups.values().filter_map(|r| r.tpr)));
    let f = ratio(min_max(rates.groups.values().filter_map(|r| r.fpr)));
    Ratio { value: Some(t.min(f)), zero_over_zero: flagged, reason: None }
}

/// Largest |TPR difference| between any two groups with defined TPR.
pub fn max_tpr_gap(rates: &GroupRates) -> f64 {
    let (lo, hi) = min_max(rates.groups.values().filter_map(|r| r.tpr));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EoConfig {
    /// Combinations whose disparity is within this much of the minimum are
    /// treated as tied and decided by balanced accuracy.
    pub tolerance: f64,
    /// Above this many threshold combinations each group's candidates are
    /// thinned to evenly spaced order statistics.
    pub max_combinations: usize,
}

impl Default for EoConfig {
    fn default() -> Self {
        EoConfig { tolerance: 0.05, max_combinations: 4_000_000 }
    }
}

/// Per-group thresholds on the fused score: predict positive iff score >= threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationRule {
    pub thresholds: BTreeMap<String, f64>,
    /// Balanced-accuracy-optimal threshold over all validation samples,
    /// used for groups without both classes and for unseen groups.
    pub fallback: f64,
    pub fallback_groups: Vec<String>,
    /// Max pairwise |dTPR| + |dFPR| on validation at the chosen thresholds.
    pub disparity: f64,
    /// Mean per-group balanced accuracy on validation.
    pub balanced_accuracy: f64,
    pub thinned: bool,
}

impl MitigationRule {
    pub fn threshold(&self, group: &str) -> f64 {
        self.thresholds.get(group).copied().unwrap_or(self.fallback)
    }

    pub fn apply<S: AsRef<str>>(&self, scores: &[f64], groups: &[S]) -> Vec<bool> {
        scores.iter().zip(groups).map(|(s, g)| *s >= self.threshold(g.as_ref())).collect()
    }
}

/// TPR/FPR of one group's validation data at each candidate threshold.
struct GroupCurve {
    thresholds: Vec<f64>,
    tpr: Vec<f64>,
    fpr: Vec<f64>,
}

impl GroupCurve {
    fn new(scores: &[f64], labels: &[bool]) -> Self {
        let mut pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, y)| **y).map(|(s, _)| *s).collect();
        let mut neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, y)| !**y).map(|(s, _)| *s).collect();
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        let mut thresholds: Vec<f64> = scores.iter().copied().chain([0.0, 1.0]).collect();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        let above = |v: &[f64], t: f64| (v.len() - v.partition_point(|x| *x < t)) as f64 / v.len() as f64;
        let tpr = thresholds.iter().map(|&t| above(&pos, t)).collect();
        let fpr = thresholds.iter().map(|&t| above(&neg, t)).collect();
        GroupCurve { thresholds, tpr, fpr }
    }

    fn ba(&self, i: usize) -> f64 {
        0.5 * (self.tpr[i] + 1.0 - self.fpr[i])
    }

    fn thin(&mut self, k: usize) {
        let n = self.thresholds.len();
        if n <= k || k < 2 {
            return;
        }
        let idx: Vec<usize> = (0..k).map(|i| crate::math::round(i as f64 * (n - 1) as f64 / (k - 1) as f64) as usize).collect();
        self.thresholds = idx.iter().map(|&i| self.thresholds[i]).collect();
        self.tpr = idx.iter().map(|&i| self.tpr[i]).collect();
        self.fpr = idx.iter().map(|&i| self.fpr[i]).collect();
    }

    /// Balanced-accuracy-optimal threshold, lowest on ties.
    fn best_single(&self) -> (f64, f64) {
        let mut best = (self.thresholds[0], self.ba(0));
        for i in 1..self.thresholds.len() {
            if self.ba(i) > best.1 + 1e-12 {
                best = (self.thresholds[i], self.ba(i));
            }
        }
        best
    }
}

/// Exhaustive per-group threshold search. Candidates per group are its
/// validation scores plus 0 and 1. The disparity (max pairwise |dTPR| +
/// |dFPR|) is minimised; combinations within `tolerance` of the minimum are
/// ranked by mean balanced accuracy, then by the lowest thresholds.
pub fn fit_eo_thresholds<S: AsRef<str>>(
    scores: &[f64],
    labels: &[bool],
    groups: &[S],
    config: &EoConfig,
) -> Result<MitigationRule> {
    if scores.is_empty() {
        return Err(invalid("empty validation set"));
    }
    if scores.len() != labels.len() || scores.len() != groups.len() {
        return Err(invalid("scores, labels and groups differ in length"));
    }
    let both = |ys: &[bool]| ys.iter().any(|y| *y) && ys.iter().any(|y| !*y);
    let fallback = if both(labels) { GroupCurve::new(scores, labels).best_single().0 } else { 0.5 };

    let mut by_group: BTreeMap<String, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for ((s, y), g) in scores.iter().zip(labels).zip(groups) {
        let e = by_group.entry(g.as_ref().to_string()).or_default();
        e.0.push(*s);
        e.1.push(*y);
    }
    let mut names = Vec::new();
    let mut curves = Vec::new();
    let mut fallback_groups = Vec::new();
    for (g, (s, y)) in &by_group {
        if both(y) {
            names.push(g.clone());
            curves.push(GroupCurve::new(s, y));
        } else {
            fallback_groups.push(g.clone());
        }
    }

    let mut thinned = false;
    let total = curves.iter().fold(1f64, |acc, c| acc * c.thresholds.len() as f64);
    if total > config.max_combinations as f64 {
        let k = libm::pow(config.max_combinations as f64, 1.0 / curves.len() as f64) as usize;
        curves.iter_mut().for_each(|c| c.thin(k.max(2)));
        thinned = true;
    }

    let mut thresholds = BTreeMap::new();
    let (disparity, balanced_accuracy) = match curves.len() {
        0 => (0.0, 0.0),
        1 => {
            let (t, ba) = curves[0].best_single();
            thresholds.insert(names[0].clone(), t);
            (0.0, ba)
        }
        _ => {
            let disparity_of = |idx: &[usize]| {
                let mut worst: f64 = 0.0;
                for a in 0..curves.len() {
                    for b in a + 1..curves.len() {
                        let d = (curves[a].tpr[idx[a]] - curves[b].tpr[idx[b]]).abs()
                            + (curves[a].fpr[idx[a]] - curves[b].fpr[idx[b]]).abs();
                        worst = worst.max(d);
                    }
                }
                worst
            };
            let mean_ba = |idx: &[usize]| {
                idx.iter().enumerate().map(|(g, &i)| curves[g].ba(i)).sum::<f64>() / curves.len() as f64
            };
            let sizes: Vec<usize> = curves.iter().map(|c| c.thresholds.len()).collect();
            let mut min_disp = f64::INFINITY;
            for_each_combination(&sizes, |idx| min_disp = min_disp.min(disparity_of(idx)));
            let bound = min_disp + config.tolerance + 1e-12;
            let mut best: Option<(Vec<usize>, f64, f64)> = None;
            for_each_combination(&sizes, |idx| {
                let d = disparity_of(idx);
                if d > bound {
                    return;
                }
                let ba = mean_ba(idx);
                if best.as_ref().is_none_or(|(_, _, b)| ba > *b + 1e-12) {
                    best = Some((idx.to_vec(), d, ba));
                }
            });
            let (idx, d, ba) = best.expect("the minimum-disparity combination is always within bound");
            for (g, &i) in idx.iter().enumerate() {
                thresholds.insert(names[g].clone(), curves[g].thresholds[i]);
            }
            (d, ba)
        }
    };
    Ok(MitigationRule { thresholds, fallback, fallback_groups, disparity, balanced_accuracy, thinned })
}

/// Visits every index tuple in lexicographic order.
fn for_each_combination<F: FnMut(&[usize])>(sizes: &[usize], mut f: F) {
    let mut idx = vec![0; sizes.len()];
    loop {
        f(&idx);
        let mut k = sizes.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Positive-class F1 per subgroup and their unweighted mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupF1 {
    pub per_group: BTreeMap<String, f64>,
    pub mean: f64,
    /// Groups whose F1 was 0/0 and set to 0.
    pub undefined: Vec<String>,
}

pub fn subgroup_f1<S: AsRef<str>>(preds: &[bool], labels: &[bool], groups: &[S]) -> SubgroupF1 {
    let mut split: BTreeMap<String, (Vec<bool>, Vec<bool>)> = BTreeMap::new();
    for ((p, y), g) in preds.iter().zip(labels).zip(groups) {
        let e = split.entry(g.as_ref().to_string()).or_default();
        e.0.push(*p);
        e.1.push(*y);
    }
    let mut per_group = BTreeMap::new();
    let mut undefined = Vec::new();
    for (g, (p, y)) in split {
        let (f, undef) = class_f1(&p, &y, true);
        if undef {
            undefined.push(g.clone());
        }
        per_group.insert(g, f);
    }
    let mean = if per_group.is_empty() { 0.0 } else { per_group.values().sum::<f64>() / per_group.len() as f64 };
    SubgroupF1 { per_group, mean, undefined }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrePostF1 {
    pub pre: SubgroupF1,
    pub post: SubgroupF1,
}

impl PrePostF1 {
    pub fn delta(&self) -> f64 {
        self.post.mean - self.pre.mean
    }
}

pub fn pre_post_f1<S: AsRef<str>>(preds_pre: &[bool], preds_post: &[bool], labels: &[bool], groups: &[S]) -> PrePostF1 {
    PrePostF1 { pre: subgroup_f1(preds_pre, labels, groups), post: subgroup_f1(preds_post, labels, groups) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Pre,
    Post,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
        }
    }
}

/// One attribute's audit at one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub attribute: String,
    pub phase: Phase,
    pub rates: GroupRates,
    pub eor: Ratio,
    pub dpr: Ratio,
    pub f1: SubgroupF1,
}

pub fn audit<S: AsRef<str>>(
    attribute: &str,
    phase: Phase,
    preds: &[bool],
    labels: &[bool],
    groups: &[S],
) -> Result<FairnessReport> {
    let rates = group_rates(preds, labels, groups)
        .map_err(|e| match e {
            Error::FairnessUndefined(m) => Error::FairnessUndefined(format!("attribute {attribute}: {m}")),
            other => other,
        })?;
    Ok(FairnessReport {
        attribute: attribute.to_string(),
        phase,
        eor: eor(&rates),
        dpr: dpr(&rates),
        f1: subgroup_f1(preds, labels, groups),
        rates,
    })
}
