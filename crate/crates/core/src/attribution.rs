//! Permutation-sampling Shapley values and dimension-normalised per-feature-set
//! shares (MM-SHAP).

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{fit_fold, make_folds, EvalConfig, FittedFold, FusedModel, TaskData};
use crate::fusion::{Biomarker, FusionRule, Modality};
use crate::math;

pub const DEFAULT_PERMUTATIONS: usize = 128;

/// A model whose output is a combination of per-block outputs, each block
/// reading a contiguous slice of the input. Lets the estimator re-evaluate
/// only the block a permutation step touched.
pub trait BlockModel {
    fn widths(&self) -> Vec<usize>;
    fn block_output(&self, block: usize, x: &[f64]) -> f64;
    fn combine(&self, outputs: &[f64]) -> f64;

    fn evaluate(&self, x: &[f64]) -> f64 {
        let mut outputs = Vec::new();
        let mut start = 0;
        for (b, w) in self.widths().into_iter().enumerate() {
            outputs.push(self.block_output(b, &x[start..start + w]));
            start += w;
        }
        self.combine(&outputs)
    }
}

/// Walks each sampled permutation from the background to `x`, crediting every
/// feature with the change it causes. `eval` receives the current point and
/// the feature just switched (`None` for a fresh start).
fn permutation_shap<F>(x: &[f64], background: &[f64], permutations: usize, seed: u64, mut eval: F) -> Vec<f64>
where
    F: FnMut(&[f64], Option<usize>) -> f64,
{
    assert_eq!(x.len(), background.len(), "input and background differ in length");
    let d = x.len();
    let mut phi = vec![0.0; d];
    if d == 0 {
        return phi;
    }
    let permutations = permutations.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..d).collect();
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        let mut z = background.to_vec();
        let mut prev = eval(&z, None);
        for &j in &order {
            if x[j].to_bits() == background[j].to_bits() {
                continue;
            }
            z[j] = x[j];
            let cur = eval(&z, Some(j));
            phi[j] += cur - prev;
            prev = cur;
        }
    }
    let p = permutations as f64;
    phi.iter_mut().for_each(|v| *v /= p);
    phi
}

/// Shapley values of a black-box function with a single background point.
pub fn shap_values<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], background: &[f64], permutations: usize, seed: u64) -> Vec<f64> {
    permutation_shap(x, background, permutations, seed, |z, _| f(z))
}

/// Same estimate as [`shap_values`] on `model.evaluate`, recomputing only the
/// block that changed at each step.
pub fn shap_values_blocked<M: BlockModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &[f64],
    permutations: usize,
    seed: u64,
) -> Vec<f64> {
    let widths = model.widths();
    let mut offsets = Vec::with_capacity(widths.len() + 1);
    offsets.push(0);
    for w in &widths {
        offsets.push(offsets.last().unwrap() + w);
    }
    assert_eq!(*offsets.last().unwrap(), x.len(), "block widths do not cover the input");
    let mut block_of = Vec::with_capacity(x.len());
    for (b, w) in widths.iter().enumerate() {
        block_of.extend(core::iter::repeat_n(b, *w));
    }
    let mut outputs = vec![0.0; widths.len()];
    permutation_shap(x, background, permutations, seed, |z, changed| {
        match changed {
            None => {
                for b in 0..widths.len() {
                    outputs[b] = model.block_output(b, &z[offsets[b]..offsets[b + 1]]);
                }
            }
            Some(j) => {
                let b = block_of[j];
                outputs[b] = model.block_output(b, &z[offsets[b]..offsets[b + 1]]);
            }
        }
        model.combine(&outputs)
    })
}

/// Per-sample shares: mean |phi| within each block divided by the sum of the
/// block means. All-zero attributions give uniform shares.
pub fn mm_shap_sample(phi: &[f64], widths: &[usize]) -> Vec<f64> {
    let m = widths.len();
    let mut means = Vec::with_capacity(m);
    let mut start = 0;
    for &w in widths {
        let block = &phi[start..start + w];
        means.push(if w == 0 { 0.0 } else { block.iter().map(|v| math::abs(*v)).sum::<f64>() / w as f64 });
        start += w;
    }
    let total: f64 = means.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return vec![1.0 / m as f64; m];
    }
    means.into_iter().map(|v| v / total).collect()
}

/// Mean of per-sample shares.
pub fn mm_shap_global(samples: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = samples.first() else {
        return Vec::new();
    };
    let mut out = vec![0.0; first.len()];
    for s in samples {
        for (o, v) in out.iter_mut().zip(s) {
            *o += v;
        }
    }
    let n = samples.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

/// Sums feature-set shares within each biomarker modality.
pub fn biomarker_shares(modalities: &[Modality], shares: &[f64]) -> BTreeMap<Biomarker, f64> {
    let mut out = BTreeMap::new();
    for (m, s) in modalities.iter().zip(shares) {
        *out.entry(m.biomarker()).or_insert(0.0) += s;
    }
    out
}

/// Index of the largest share (earliest on ties).
pub fn top_share(shares: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in shares.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleAttribution {
    pub run: usize,
    pub fold: usize,
    /// Participant index in the cohort.
    pub participant: usize,
    pub fused_score: f64,
    pub baseline_score: f64,
    pub phi: Vec<f64>,
    pub shares: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapReport {
    pub modalities: Vec<Modality>,
    pub rule: FusionRule,
    pub samples: Vec<SampleAttribution>,
    /// Global shares of each run (mean over that run's test samples).
    pub run_shares: Vec<Vec<f64>>,
    /// Mean of `run_shares`.
    pub global: Vec<f64>,
    pub permutations: usize,
    pub background: &'static str,
    pub seed_base: u64,
    pub skipped_folds: usize,
}

impl ShapReport {
    /// Builds run-level and global shares from per-sample attributions.
    pub fn assemble(
        modalities: Vec<Modality>,
        rule: FusionRule,
        mut samples: Vec<SampleAttribution>,
        runs: usize,
        permutations: usize,
        seed_base: u64,
        skipped_folds: usize,
    ) -> Self {
        samples.sort_by_key(|s| (s.run, s.fold, s.participant));
        let run_shares: Vec<Vec<f64>> = (0..runs)
            .map(|r| samples.iter().filter(|s| s.run == r).map(|s| s.shares.clone()).collect::<Vec<_>>())
            .filter(|v| !v.is_empty())
            .map(|v| mm_shap_global(&v))
            .collect();
        let global = mm_shap_global(&run_shares);
        ShapReport {
            modalities,
            rule,
            samples,
            run_shares,
            global,
            permutations,
            background: "training-fold feature means",
            seed_base,
            skipped_folds,
        }
    }

    /// Global shares of one fold's test samples.
    pub fn fold_shares(&self, run: usize, fold: usize) -> Option<Vec<f64>> {
        let v: Vec<Vec<f64>> =
            self.samples.iter().filter(|s| s.run == run && s.fold == fold).map(|s| s.shares.clone()).collect();
        (!v.is_empty()).then(|| mm_shap_global(&v))
    }
}

/// Attributes the fused score of every test participant of one fitted fold.
pub fn explain_fold(
    data: &TaskData<'_>,
    fitted: &FittedFold,
    rule: FusionRule,
    permutations: usize,
) -> Result<Vec<SampleAttribution>> {
    let model = FusedModel::new(fitted, rule);
    let widths = model.widths();
    let background = model.background();
    let baseline_score = model.evaluate(&background);
    let mut out = Vec::with_capacity(fitted.plan.test.len());
    for &i in &fitted.plan.test {
        let x = model.input(data, i)?;
        let phi = shap_values_blocked(&model, &x, &background, permutations, fitted.plan.seed);
        out.push(SampleAttribution {
            run: fitted.plan.run,
            fold: fitted.plan.fold,
            participant: i,
            fused_score: model.evaluate(&x),
            baseline_score,
            shares: mm_shap_sample(&phi, &widths),
            phi,
        });
    }
    Ok(out)
}

/// Runs the whole cross-validation grid and explains every test prediction.
pub fn explain_task(data: &TaskData<'_>, config: &EvalConfig, rule: FusionRule, permutations: usize) -> Result<ShapReport> {
    let mut samples = Vec::new();
    let mut skipped = 0;
    for plan in make_folds(&data.ids, config.runs, config.seed_base)? {
        match fit_fold(data, &plan, config) {
            Ok(f) => samples.extend(explain_fold(data, &f, rule, permutations)?),
            Err(Error::DegenerateFold) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(ShapReport::assemble(data.members.clone(), rule, samples, config.runs, permutations, config.seed_base, skipped))
}
