//! Thread-parallel drivers around the core harness. Folds are independent, so
//! they are mapped in parallel and reduced in (run, fold) order; results do not
//! depend on the number of threads.

use std::collections::BTreeMap;

use mmscreen_core::attribution::{explain_fold, SampleAttribution, ShapReport};
use mmscreen_core::cohort::{bin_sensitive, Cohort, SensitiveAttribute};
use mmscreen_core::evaluation::{
    aggregate, evaluate_fold, fit_fold, make_folds, prepare, EvalConfig, FittedFold, FoldPlan, MetricSummary,
    TaskData, TaskReport,
};
use mmscreen_core::fairness::{audit, fit_eo_thresholds, max_tpr_gap, EoConfig, FairnessReport, MitigationRule, Phase};
use mmscreen_core::fusion::{fuse, Fused, FusionRule};
use mmscreen_core::{Error, Result};
use rayon::prelude::*;

pub fn thread_pool(threads: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    let n = threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    Ok(rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?)
}

fn plans(data: &TaskData<'_>, config: &EvalConfig) -> Result<Vec<FoldPlan>> {
    make_folds(&data.ids, config.runs, config.seed_base)
}

/// Parallel counterpart of `run_task`, with identical output.
pub fn evaluate_task(pool: &rayon::ThreadPool, cohort: &Cohort, task: &str, config: &EvalConfig) -> Result<TaskReport> {
    let data = prepare(cohort, task, config)?;
    let plans = plans(&data, config)?;
    let folds = pool.install(|| plans.par_iter().map(|p| evaluate_fold(&data, p, config)).collect::<Result<Vec<_>>>())?;
    Ok(aggregate(&data, config, folds))
}

/// Parallel counterpart of `explain_task`.
pub fn explain_task(
    pool: &rayon::ThreadPool,
    cohort: &Cohort,
    task: &str,
    config: &EvalConfig,
    rule: FusionRule,
    permutations: usize,
) -> Result<ShapReport> {
    let data = prepare(cohort, task, config)?;
    let plans = plans(&data, config)?;
    let per_fold: Vec<Option<Vec<SampleAttribution>>> = pool.install(|| {
        plans
            .par_iter()
            .map(|p| match fit_fold(&data, p, config) {
                Ok(f) => explain_fold(&data, &f, rule, permutations).map(Some),
                Err(Error::DegenerateFold) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let skipped = per_fold.iter().filter(|f| f.is_none()).count();
    let samples = per_fold.into_iter().flatten().flatten().collect();
    Ok(ShapReport::assemble(data.members.clone(), rule, samples, config.runs, permutations, config.seed_base, skipped))
}

fn fused_outputs(data: &TaskData<'_>, fitted: &FittedFold, ids: &[usize], rule: FusionRule, config: &EvalConfig) -> Result<Vec<Fused>> {
    let (probs, _) = fitted.predict(data, ids)?;
    Ok((0..ids.len())
        .map(|i| {
            let col: Vec<f64> = probs.iter().map(|p| p[i]).collect();
            fuse(rule, &col, &fitted.selected, config.tie)
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct AttributeFold {
    pub attribute: SensitiveAttribute,
    /// `None` when the test split holds a single group.
    pub pre: Option<FairnessReport>,
    pub post: Option<FairnessReport>,
    pub mitigation: Option<MitigationRule>,
}

#[derive(Debug, Clone)]
pub struct FoldAudit {
    pub run: usize,
    pub fold: usize,
    pub attributes: Vec<AttributeFold>,
}

#[derive(Debug, Clone)]
pub struct AuditRun {
    pub task: String,
    pub rule: FusionRule,
    pub attributes: Vec<SensitiveAttribute>,
    pub runs: usize,
    pub folds: Vec<FoldAudit>,
    pub skipped_folds: usize,
}

fn groups_of(data: &TaskData<'_>, ids: &[usize], attribute: SensitiveAttribute) -> Vec<&'static str> {
    let spec = data.cohort.sensitive();
    ids.iter().map(|&i| bin_sensitive(data.record(i), attribute, spec)).collect()
}

fn undefined_to_none(r: Result<FairnessReport>) -> Result<Option<FairnessReport>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::FairnessUndefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Fairness of the fused predictions on every test split. With `mitigation`,
/// per-group thresholds are fit on the fold's validation split and applied
/// to its test split.
pub fn audit_task(
    pool: &rayon::ThreadPool,
    cohort: &Cohort,
    task: &str,
    config: &EvalConfig,
    rule: FusionRule,
    attributes: &[SensitiveAttribute],
    mitigation: Option<&EoConfig>,
) -> Result<AuditRun> {
    let data = prepare(cohort, task, config)?;
    for &a in attributes {
        let mut g = groups_of(&data, &data.ids, a);
        g.sort();
        g.dedup();
        if g.len() < 2 {
            return Err(Error::FairnessUndefined(format!(
                "attribute {a} has {} group(s) among the participants of task {task}; at least 2 are needed",
                g.len()
            )));
        }
    }
    let plans = plans(&data, config)?;
    let per_fold: Vec<Option<FoldAudit>> = pool.install(|| {
        plans
            .par_iter()
            .map(|p| {
                let fitted = match fit_fold(&data, p, config) {
                    Ok(f) => f,
                    Err(Error::DegenerateFold) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let test = fused_outputs(&data, &fitted, &p.test, rule, config)?;
                let scores: Vec<f64> = test.iter().map(|f| f.score).collect();
                let pre_preds: Vec<bool> = test.iter().map(|f| f.label).collect();
                let labels = data.labels_of(&p.test);
                let val = match mitigation {
                    Some(_) => Some(fused_outputs(&data, &fitted, &p.validation, rule, config)?),
                    None => None,
                };
                let mut out = Vec::with_capacity(attributes.len());
                for &a in attributes {
                    let groups = groups_of(&data, &p.test, a);
                    let pre = undefined_to_none(audit(a.name(), Phase::Pre, &pre_preds, &labels, &groups))?;
                    let (post, rule) = match (mitigation, &val) {
                        (Some(eo), Some(val)) => {
                            let vs: Vec<f64> = val.iter().map(|f| f.score).collect();
                            let rule =
                                fit_eo_thresholds(&vs, &data.labels_of(&p.validation), &groups_of(&data, &p.validation, a), eo)?;
                            let post_preds = rule.apply(&scores, &groups);
                            let post = undefined_to_none(audit(a.name(), Phase::Post, &post_preds, &labels, &groups))?;
                            (post, Some(rule))
                        }
                        _ => (None, None),
                    };
                    out.push(AttributeFold { attribute: a, pre, post, mitigation: rule });
                }
                Ok(Some(FoldAudit { run: p.run, fold: p.fold, attributes: out }))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let skipped_folds = per_fold.iter().filter(|f| f.is_none()).count();
    Ok(AuditRun {
        task: task.to_string(),
        rule,
        attributes: attributes.to_vec(),
        runs: config.runs,
        folds: per_fold.into_iter().flatten().collect(),
        skipped_folds,
    })
}

/// A fairness quantity reduced like the performance metrics: fold values
/// averaged within each run, then across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessSummary {
    pub summary: MetricSummary,
    pub na_folds: usize,
}

pub const FAIRNESS_METRICS: [&str; 4] = ["EOR", "DPR", "MaxTPRGap", "MeanSubgroupF1"];

impl AuditRun {
    fn reports(&self, attribute: SensitiveAttribute, phase: Phase) -> impl Iterator<Item = (usize, Option<&FairnessReport>)> {
        self.folds.iter().map(move |f| {
            let a = f.attributes.iter().find(|x| x.attribute == attribute).expect("attribute audited in every fold");
            (f.run, if phase == Phase::Pre { a.pre.as_ref() } else { a.post.as_ref() })
        })
    }

    pub fn summarize(&self, attribute: SensitiveAttribute, phase: Phase, metric: &str) -> FairnessSummary {
        let value = |r: &FairnessReport| match metric {
            "EOR" => r.eor.value,
            "DPR" => r.dpr.value,
            "MaxTPRGap" => Some(max_tpr_gap(&r.rates)),
            "MeanSubgroupF1" => Some(r.f1.mean),
            other => panic!("unknown fairness metric {other}"),
        };
        let mut by_run: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut na = 0;
        for (run, r) in self.reports(attribute, phase) {
            match r.and_then(value) {
                Some(v) => by_run.entry(run).or_default().push(v),
                None => na += 1,
            }
        }
        let per_run = by_run.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
        FairnessSummary { summary: MetricSummary::from_runs(per_run), na_folds: na }
    }

    /// Per-group mean (TPR, FPR, selection rate, F1) over folds where defined,
    /// with the mean group size per fold.
    pub fn group_means(&self, attribute: SensitiveAttribute, phase: Phase) -> BTreeMap<String, [Option<f64>; 5]> {
        let mut acc: BTreeMap<String, [(f64, usize); 5]> = BTreeMap::new();
        for (_, r) in self.reports(attribute, phase) {
            let Some(r) = r else { continue };
            for (g, rates) in &r.rates.groups {
                let e = acc.entry(g.clone()).or_insert([(0.0, 0); 5]);
                let vals = [rates.tpr, rates.fpr, rates.selection_rate, r.f1.per_group.get(g).copied(), Some(rates.n as f64)];
                for (slot, v) in e.iter_mut().zip(vals) {
                    if let Some(v) = v {
                        slot.0 += v;
                        slot.1 += 1;
                    }
                }
            }
        }
        acc.into_iter()
            .map(|(g, e)| (g, e.map(|(s, n)| (n > 0).then(|| s / n as f64))))
            .collect()
    }

    /// Mean mitigation threshold per group over folds.
    pub fn mean_thresholds(&self, attribute: SensitiveAttribute) -> BTreeMap<String, f64> {
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for f in &self.folds {
            for a in f.attributes.iter().filter(|a| a.attribute == attribute) {
                if let (Some(rule), Some(pre)) = (&a.mitigation, &a.pre) {
                    for g in pre.rates.groups.keys() {
                        let e = acc.entry(g.clone()).or_default();
                        e.0 += rule.threshold(g);
                        e.1 += 1;
                    }
                }
            }
        }
        acc.into_iter().map(|(g, (s, n))| (g, s / n as f64)).collect()
    }
}
