use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldPlan, FOLDS, SEED_BASE};
use super::metrics::{accuracy, auroc, macro_f1, Metric, MetricSummary};
use crate::attribution::BlockModel;
use crate::cohort::{Cohort, DemographicEncoder, FeatureSet, ParticipantRecord, TaskSpec};
use crate::error::{invalid, Error, Result};
use crate::fusion::{self, Fused, FusionRule, Modality, Pipeline, TiePolicy};
use crate::learners::{self, FittedModel, LearnerKind, LearnerParams, LearnerSpec, ProbabilisticClassifier, Standardizer};
use crate::matrix::Matrix;
use crate::temporal::{self, HmmConfig, HmmModel, SummaryKind, HRV_QUANTILES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub pipeline: Pipeline,
    /// Feature sets fused by the pipeline; empty means every one the cohort supports.
    pub members: Vec<Modality>,
    pub rules: Vec<FusionRule>,
    pub tie: TiePolicy,
    pub learners: LearnerParams,
    pub hmm: HmmConfig,
    pub runs: usize,
    pub seed_base: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            pipeline: Pipeline::LrGbdt,
            members: Vec::new(),
            rules: FusionRule::ALL.to_vec(),
            tie: TiePolicy::Positive,
            learners: LearnerParams::default(),
            hmm: HmmConfig::default(),
            runs: 100,
            seed_base: SEED_BASE,
        }
    }
}

/// One task's participants, labels, and the summaries that do not depend on
/// the fold (pooled statistics, quantiles, raw static vectors).
#[derive(Debug, Clone)]
pub struct TaskData<'a> {
    pub cohort: &'a Cohort,
    pub task: TaskSpec,
    pub members: Vec<Modality>,
    /// Participant indices in the task, in cohort order.
    pub ids: Vec<usize>,
    /// Labeled participants left out because a member feature set is missing.
    pub missing_series: usize,
    labels: Vec<Option<bool>>,
    fixed: BTreeMap<Modality, Vec<Vec<f64>>>,
}

impl TaskData<'_> {
    pub fn label(&self, participant: usize) -> bool {
        self.labels[participant].expect("participant is not part of this task")
    }

    pub fn labels_of(&self, ids: &[usize]) -> Vec<bool> {
        ids.iter().map(|&i| self.label(i)).collect()
    }

    pub fn record(&self, participant: usize) -> &ParticipantRecord {
        &self.cohort.participants()[participant]
    }

    fn series(&self, participant: usize, set: FeatureSet) -> &Matrix {
        let id = &self.record(participant).id;
        &self.cohort.series(id, set).expect("member series checked in prepare").data
    }

    /// Summary vector of one participant under a fitted summariser, and
    /// whether the series had to be truncated to the HMM's padded length.
    pub fn summarize(&self, modality: Modality, summarizer: &Summarizer, participant: usize) -> Result<(Vec<f64>, bool)> {
        match summarizer {
            Summarizer::Fixed => Ok((self.fixed[&modality][participant].clone(), false)),
            Summarizer::Hmm(model) => temporal::hmm_dynamics(model, self.series(participant, modality.source())),
            Summarizer::Demographics(enc) => Ok((enc.encode(self.record(participant)), false)),
        }
    }

    fn summary_matrix(&self, modality: Modality, summarizer: &Summarizer, ids: &[usize]) -> Result<(Matrix, usize)> {
        let mut rows = Vec::with_capacity(ids.len());
        let mut truncated = 0;
        for &i in ids {
            let (v, t) = self.summarize(modality, summarizer, i)?;
            truncated += usize::from(t);
            rows.push(v);
        }
        Ok((Matrix::from_rows(&rows)?, truncated))
    }
}

/// Resolves members and labels for `task` and precomputes fold-independent
/// summaries.
pub fn prepare<'a>(cohort: &'a Cohort, task: &str, config: &EvalConfig) -> Result<TaskData<'a>> {
    let spec = cohort.task(task).ok_or_else(|| invalid(format!("unknown task '{task}'")))?.clone();
    let mut present = cohort.feature_sets();
    if !present.contains(&FeatureSet::Demographics) {
        present.push(FeatureSet::Demographics);
    }
    let members = if config.members.is_empty() {
        Modality::available(&present)
    } else {
        if let Some(m) = config.members.iter().find(|m| !present.contains(&m.source())) {
            return Err(invalid(format!("feature set {} needed by {m} is not in the cohort", m.source())));
        }
        let mut v = config.members.clone();
        v.sort();
        v.dedup();
        v
    };

    let mut labels = vec![None; cohort.len()];
    let mut ids = Vec::new();
    let mut missing_series = 0;
    for (i, y) in cohort.labeled(&spec) {
        let id = &cohort.participants()[i].id;
        let complete = members
            .iter()
            .all(|m| m.source() == FeatureSet::Demographics || cohort.series(id, m.source()).is_some());
        if complete {
            labels[i] = Some(y);
            ids.push(i);
        } else {
            missing_series += 1;
        }
    }
    let pos = ids.iter().filter(|&&i| labels[i] == Some(true)).count();
    let neg = ids.len() - pos;
    if pos < FOLDS || neg < FOLDS {
        return Err(invalid(format!(
            "task {task}: need at least {FOLDS} participants per class, got {pos} positive and {neg} negative"
        )));
    }

    let mut fixed = BTreeMap::new();
    for &m in &members {
        if m == Modality::Demographics || m.summary() == SummaryKind::HmmDynamics {
            continue;
        }
        let mut rows = vec![Vec::new(); cohort.len()];
        for &i in &ids {
            let x = &cohort.series(&cohort.participants()[i].id, m.source()).expect("checked above").data;
            rows[i] = match m.summary() {
                SummaryKind::Stats => temporal::pool_stats(x),
                SummaryKind::Quantiles => temporal::pool_quantiles(x, &HRV_QUANTILES),
                _ => x.as_slice().to_vec(),
            };
        }
        fixed.insert(m, rows);
    }
    Ok(TaskData { cohort, task: spec, members, ids, missing_series, labels, fixed })
}

/// How a member turns a participant's raw series into its summary vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Summarizer {
    Fixed,
    Hmm(HmmModel),
    Demographics(DemographicEncoder),
}

/// Everything fit on one fold's training split for one feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedMember {
    pub modality: Modality,
    pub summarizer: Summarizer,
    pub standardizer: Standardizer,
    pub model: FittedModel,
    /// Training-split mean of the summary vector.
    pub background: Vec<f64>,
    pub val_auroc: Option<f64>,
}

impl FittedMember {
    pub fn learner(&self) -> LearnerKind {
        self.model.kind()
    }

    pub fn width(&self) -> usize {
        self.background.len()
    }

    /// Positive-class probability for a summary vector.
    pub fn predict(&self, summary: &[f64]) -> f64 {
        self.model.predict_row(&self.standardizer.transform_row(summary))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedFold {
    pub plan: FoldPlan,
    pub members: Vec<FittedMember>,
    /// Members admitted to selective voting by their validation AUROC.
    pub selected: Vec<bool>,
    pub hmm_truncations: usize,
}

/// Fits summarisers, standardisers and learners on the training split only,
/// then scores each member on the validation split.
pub fn fit_fold(data: &TaskData<'_>, plan: &FoldPlan, config: &EvalConfig) -> Result<FittedFold> {
    let y_train = data.labels_of(&plan.train);
    let pos = y_train.iter().filter(|v| **v).count();
    if pos == 0 || pos == y_train.len() {
        return Err(Error::DegenerateFold);
    }
    let y_val = data.labels_of(&plan.validation);
    let mut members = Vec::with_capacity(data.members.len());
    let mut hmm_truncations = 0;
    for &m in &data.members {
        let summarizer = if m == Modality::Demographics {
            let train: Vec<ParticipantRecord> = plan.train.iter().map(|&i| data.record(i).clone()).collect();
            Summarizer::Demographics(DemographicEncoder::fit(&train)?)
        } else if m.summary() == SummaryKind::HmmDynamics {
            let train: Vec<&Matrix> = plan.train.iter().map(|&i| data.series(i, m.source())).collect();
            Summarizer::Hmm(temporal::fit_hmm(&train, &config.hmm, plan.seed)?)
        } else {
            Summarizer::Fixed
        };
        let (x_train, _) = data.summary_matrix(m, &summarizer, &plan.train)?;
        let standardizer = Standardizer::fit(&x_train);
        let spec = LearnerSpec {
            kind: fusion::route(config.pipeline, x_train.cols()),
            params: config.learners.clone(),
            seed: plan.seed,
        };
        let model = learners::fit(&standardizer.transform(&x_train), &y_train, &spec)?;
        let background = (0..x_train.cols()).map(|j| crate::math::mean(&x_train.column(j))).collect();
        let mut member = FittedMember { modality: m, summarizer, standardizer, model, background, val_auroc: None };
        let (x_val, t) = data.summary_matrix(m, &member.summarizer, &plan.validation)?;
        hmm_truncations += t;
        let p_val: Vec<f64> = x_val.iter_rows().map(|r| member.predict(r)).collect();
        member.val_auroc = auroc(&p_val, &y_val);
        members.push(member);
    }
    let val: BTreeMap<Modality, Option<f64>> = members.iter().map(|m| (m.modality, m.val_auroc)).collect();
    let chosen = fusion::select_members(&val);
    let selected = members.iter().map(|m| chosen.contains(&m.modality)).collect();
    Ok(FittedFold { plan: plan.clone(), members, selected, hmm_truncations })
}

impl FittedFold {
    /// Member probabilities (`[member][sample]`) for the given participants.
    pub fn predict(&self, data: &TaskData<'_>, ids: &[usize]) -> Result<(Vec<Vec<f64>>, usize)> {
        let mut out = Vec::with_capacity(self.members.len());
        let mut truncated = 0;
        for m in &self.members {
            let (x, t) = data.summary_matrix(m.modality, &m.summarizer, ids)?;
            truncated += t;
            out.push(x.iter_rows().map(|r| m.predict(r)).collect());
        }
        Ok((out, truncated))
    }

    /// Predicts the test split and applies every configured fusion rule.
    pub fn test(&self, data: &TaskData<'_>, config: &EvalConfig) -> Result<FoldResult> {
        let labels = data.labels_of(&self.plan.test);
        let (member_probs, t) = self.predict(data, &self.plan.test)?;
        let mut fused = BTreeMap::new();
        for &rule in &config.rules {
            let v: Vec<Fused> = (0..labels.len())
                .map(|i| {
                    let col: Vec<f64> = member_probs.iter().map(|p| p[i]).collect();
                    fusion::fuse(rule, &col, &self.selected, config.tie)
                })
                .collect();
            fused.insert(rule, v);
        }
        Ok(FoldResult {
            run: self.plan.run,
            fold: self.plan.fold,
            test: self.plan.test.clone(),
            labels,
            members: self.members.iter().map(|m| m.modality).collect(),
            learners: self.members.iter().map(|m| m.learner()).collect(),
            member_probs,
            val_auroc: self.members.iter().map(|m| m.val_auroc).collect(),
            selected: self.selected.clone(),
            fused,
            hmm_truncations: self.hmm_truncations + t,
        })
    }
}

/// The fused pipeline of one fold as a function of the concatenated summary
/// vectors of its members.
pub struct FusedModel<'a> {
    fold: &'a FittedFold,
    rule: FusionRule,
}

impl<'a> FusedModel<'a> {
    pub fn new(fold: &'a FittedFold, rule: FusionRule) -> Self {
        FusedModel { fold, rule }
    }

    pub fn background(&self) -> Vec<f64> {
        self.fold.members.iter().flat_map(|m| m.background.iter().copied()).collect()
    }

    pub fn input(&self, data: &TaskData<'_>, participant: usize) -> Result<Vec<f64>> {
        let mut x = Vec::new();
        for m in &self.fold.members {
            x.extend(data.summarize(m.modality, &m.summarizer, participant)?.0);
        }
        Ok(x)
    }
}

impl BlockModel for FusedModel<'_> {
    fn widths(&self) -> Vec<usize> {
        self.fold.members.iter().map(|m| m.width()).collect()
    }

    fn block_output(&self, block: usize, x: &[f64]) -> f64 {
        let p = self.fold.members[block].predict(x);
        match self.rule {
            FusionRule::AverageProb => p,
            FusionRule::Majority | FusionRule::Selective => f64::from(u8::from(fusion::vote(p))),
        }
    }

    fn combine(&self, outputs: &[f64]) -> f64 {
        match self.rule {
            FusionRule::AverageProb | FusionRule::Majority => crate::math::mean(outputs),
            FusionRule::Selective => {
                let v: Vec<f64> =
                    outputs.iter().zip(&self.fold.selected).filter(|(_, s)| **s).map(|(o, _)| *o).collect();
                crate::math::mean(&v)
            }
        }
    }
}

/// Test-split predictions of one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub run: usize,
    pub fold: usize,
    pub test: Vec<usize>,
    pub labels: Vec<bool>,
    pub members: Vec<Modality>,
    pub learners: Vec<LearnerKind>,
    /// `[member][sample]` positive-class probabilities.
    pub member_probs: Vec<Vec<f64>>,
    pub val_auroc: Vec<Option<f64>>,
    pub selected: Vec<bool>,
    pub fused: BTreeMap<FusionRule, Vec<Fused>>,
    pub hmm_truncations: usize,
}

/// What a metric is computed on: a fused rule or a single member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Target {
    Fused(FusionRule),
    Unimodal(Modality),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Fused(r) => write!(f, "{r}"),
            Target::Unimodal(m) => write!(f, "{m}"),
        }
    }
}

impl FoldResult {
    /// Continuous scores and hard predictions for a target.
    pub fn outputs(&self, target: Target) -> Option<(Vec<f64>, Vec<bool>)> {
        match target {
            Target::Fused(rule) => {
                let f = self.fused.get(&rule)?;
                Some((f.iter().map(|x| x.score).collect(), f.iter().map(|x| x.label).collect()))
            }
            Target::Unimodal(m) => {
                let i = self.members.iter().position(|x| *x == m)?;
                let p = self.member_probs[i].clone();
                let v = p.iter().map(|&x| fusion::vote(x)).collect();
                Some((p, v))
            }
        }
    }

    /// `None` when the target is absent or AUROC is undefined on this split.
    pub fn metric(&self, target: Target, metric: Metric) -> Option<f64> {
        let (scores, preds) = self.outputs(target)?;
        match metric {
            Metric::Auroc => auroc(&scores, &self.labels),
            Metric::Accuracy => Some(accuracy(&preds, &self.labels)),
            Metric::MacroF1 => Some(macro_f1(&preds, &self.labels)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FoldOutcome {
    Done(FoldResult),
    Skipped { run: usize, fold: usize, reason: String },
}

impl FoldOutcome {
    pub fn result(&self) -> Option<&FoldResult> {
        match self {
            FoldOutcome::Done(r) => Some(r),
            FoldOutcome::Skipped { .. } => None,
        }
    }
}

/// Fits and tests one fold; a single-class training split is reported as skipped.
pub fn evaluate_fold(data: &TaskData<'_>, plan: &FoldPlan, config: &EvalConfig) -> Result<FoldOutcome> {
    match fit_fold(data, plan, config) {
        Ok(f) => Ok(FoldOutcome::Done(f.test(data, config)?)),
        Err(Error::DegenerateFold) => Ok(FoldOutcome::Skipped {
            run: plan.run,
            fold: plan.fold,
            reason: Error::DegenerateFold.to_string(),
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskReport {
    pub task: String,
    pub pipeline: Pipeline,
    pub members: Vec<Modality>,
    pub runs: usize,
    /// Ordered by (run, fold).
    pub folds: Vec<FoldOutcome>,
    /// Per-fold metrics averaged within each run, then across runs.
    pub summaries: BTreeMap<(Target, Metric), MetricSummary>,
    /// Folds whose test split left AUROC undefined, per target.
    pub auroc_na: BTreeMap<Target, usize>,
    pub skipped_folds: usize,
    pub hmm_truncations: usize,
    pub missing_series: usize,
}

impl TaskReport {
    pub fn summary(&self, target: Target, metric: Metric) -> Option<&MetricSummary> {
        self.summaries.get(&(target, metric))
    }
}

/// Deterministic reduction of fold outcomes, whatever order they were computed in.
pub fn aggregate(data: &TaskData<'_>, config: &EvalConfig, mut folds: Vec<FoldOutcome>) -> TaskReport {
    let key = |o: &FoldOutcome| match o {
        FoldOutcome::Done(r) => (r.run, r.fold),
        FoldOutcome::Skipped { run, fold, .. } => (*run, *fold),
    };
    folds.sort_by_key(key);
    let mut targets: Vec<Target> = config.rules.iter().map(|r| Target::Fused(*r)).collect();
    targets.extend(data.members.iter().map(|m| Target::Unimodal(*m)));
    targets.sort();
    targets.dedup();

    let mut summaries = BTreeMap::new();
    let mut auroc_na = BTreeMap::new();
    for &t in &targets {
        for metric in Metric::ALL {
            let mut per_run = Vec::new();
            for run in 0..config.runs {
                let vals: Vec<f64> = folds
                    .iter()
                    .filter_map(|o| o.result())
                    .filter(|r| r.run == run)
                    .filter_map(|r| r.metric(t, metric))
                    .collect();
                if !vals.is_empty() {
                    per_run.push(crate::math::mean(&vals));
                }
            }
            summaries.insert((t, metric), MetricSummary::from_runs(per_run));
        }
        let na = folds.iter().filter_map(|o| o.result()).filter(|r| r.metric(t, Metric::Auroc).is_none()).count();
        auroc_na.insert(t, na);
    }
    TaskReport {
        task: data.task.name.clone(),
        pipeline: config.pipeline,
        members: data.members.clone(),
        runs: config.runs,
        skipped_folds: folds.iter().filter(|o| o.result().is_none()).count(),
        hmm_truncations: folds.iter().filter_map(|o| o.result()).map(|r| r.hmm_truncations).sum(),
        missing_series: data.missing_series,
        folds,
        summaries,
        auroc_na,
    }
}

/// Sequential end-to-end evaluation of one task.
pub fn run_task(cohort: &Cohort, task: &str, config: &EvalConfig) -> Result<TaskReport> {
    if config.runs == 0 {
        return Err(invalid("runs must be at least 1"));
    }
    let data = prepare(cohort, task, config)?;
    let plans = make_folds(&data.ids, config.runs, config.seed_base)?;
    let folds = plans.iter().map(|p| evaluate_fold(&data, p, config)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&data, config, folds))
}
