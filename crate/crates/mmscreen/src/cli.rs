//! Subcommands: synth, validate, evaluate, explain, audit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mmscreen_core::attribution::{biomarker_shares, ShapReport};
use mmscreen_core::cohort::{Cohort, FeatureSet};
use mmscreen_core::evaluation::{Metric, MetricSummary, Target, TaskReport};
use mmscreen_core::fairness::{four_fifths, Phase};
use mmscreen_core::fusion::{route, vote, FusionRule, Modality, Pipeline, HIGH_DIM};
use mmscreen_core::synth::{generate, plant_bias};
use mmscreen_core::temporal::{SummaryKind, HRV_QUANTILES};

use crate::config::{RunConfig, SynthFile};
use crate::error::AppError;
use crate::io::{load_cohort, write_cohort};
use crate::output::{fmt6, fmt_opt, Manifest, OutputSet, Table};
use crate::runner::{self, AuditRun, FAIRNESS_METRICS};

pub const RESULTS_FILE: &str = "results.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
const AGGREGATION: &str = "per-fold metric, mean within run, mean across runs; CI = mean +/- 1.96 sd/sqrt(runs)";

#[derive(Debug, Parser)]
#[command(name = "mmscreen", version, about = "Multimodal late-fusion screening: evaluate, explain and audit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory; overrides the config.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of cross-validation runs; overrides the config.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Worker threads (default: available parallelism). Never changes results.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Base seed; run r uses seed_base + r.
    #[arg(long)]
    pub seed_base: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort directory.
    Synth {
        /// Synthesis recipe (TOML); defaults to the 39-participant preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Seed; overrides the recipe.
        #[arg(long)]
        seed_base: Option<u64>,
    },
    /// Load a cohort and print feature-set shapes and label balance.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Run the cross-validation grid and write results and predictions.
    Evaluate(Common),
    /// Attribute the best fused pipeline's predictions to feature sets.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        task: String,
    },
    /// Audit group fairness before and after threshold mitigation.
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        task: String,
    },
}

/// Runs a parsed command, returning what it printed.
pub fn run(cli: Cli) -> Result<String, AppError> {
    match cli.command {
        Command::Synth { config, out, seed_base } => cmd_synth(config.as_deref(), &out, seed_base),
        Command::Validate { dataset } => cmd_validate(&dataset),
        Command::Evaluate(c) => cmd_evaluate(&c),
        Command::Explain { common, task } => cmd_explain(&common, &task),
        Command::Audit { common, task } => cmd_audit(&common, &task),
    }
}

pub fn cmd_synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<String, AppError> {
    let mut recipe = match config {
        Some(p) => SynthFile::load(p)?,
        None => SynthFile::default(),
    };
    if let Some(s) = seed {
        recipe.seed = s;
    }
    let cfg = recipe.build()?;
    let mut cohort = generate(&cfg)?;
    if let Some((attr, group, shift, sets)) = recipe.bias()? {
        cohort = plant_bias(&cohort, attr, &group, shift, &sets)?;
    }
    write_cohort(&cohort, out)?;
    Ok(format!("wrote {} participants to {}\n", cohort.len(), out.display()))
}

fn summary_dim(m: Modality, raw_dim: usize, hmm_states: usize) -> Option<usize> {
    match m.summary() {
        SummaryKind::Stats => Some(2 * raw_dim),
        SummaryKind::Quantiles => Some(HRV_QUANTILES.len() * raw_dim),
        SummaryKind::HmmDynamics => Some(2 * hmm_states),
        SummaryKind::Raw if m == Modality::Demographics => None,
        SummaryKind::Raw => Some(raw_dim),
    }
}

pub fn validate_report(cohort: &Cohort) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "participants: {}", cohort.len());
    let mut present = cohort.feature_sets();
    if !present.contains(&FeatureSet::Demographics) {
        present.push(FeatureSet::Demographics);
    }
    let modalities = Modality::available(&present);
    let _ = writeln!(s, "feature sets: {}", modalities.len());
    let states = mmscreen_core::temporal::HmmConfig::default().states;
    for m in &modalities {
        let src = m.source();
        let ids: Vec<&str> = cohort.participants().iter().map(|p| p.id.as_str()).collect();
        let lens: Vec<usize> = ids.iter().filter_map(|id| cohort.series(id, src)).map(|x| x.len()).collect();
        let raw = cohort.dim(src).unwrap_or(0);
        let (shape, n) = if src == FeatureSet::Demographics {
            ("participants table".to_string(), cohort.len())
        } else {
            let lo = lens.iter().min().copied().unwrap_or(0);
            let hi = lens.iter().max().copied().unwrap_or(0);
            (format!("T {lo}..{hi} x D {raw}"), lens.len())
        };
        let (dim, learner) = match summary_dim(*m, raw, states) {
            Some(d) => (d.to_string(), route(Pipeline::LrGbdt, d).to_string()),
            None => ("one-hot".to_string(), "LR".to_string()),
        };
        let _ = writeln!(s, "  {:<22} {:<22} participants {:>4}  summary dim {:>6}  LRGBDT -> {learner}", m.name(), shape, n, dim);
    }
    let _ = writeln!(s, "tasks:");
    for t in cohort.tasks() {
        let labeled = cohort.labeled(t);
        let pos = labeled.iter().filter(|(_, y)| *y).count();
        let _ = writeln!(
            s,
            "  {:<24} labeled {:>4}  positive {:>4}  negative {:>4}  missing {:>4}  ({})",
            t.name,
            labeled.len(),
            pos,
            labeled.len() - pos,
            cohort.len() - labeled.len(),
            t.positive_means
        );
    }
    let _ = writeln!(s, "sensitive groups:");
    for (a, g) in groups_by_attribute(cohort) {
        let _ = writeln!(s, "  {a:<10} {}", g.join(" | "));
    }
    let _ = writeln!(s, "routing threshold: summary dim < {HIGH_DIM} -> LR, otherwise GBDT");
    s
}

pub fn cmd_validate(dataset: &Path) -> Result<String, AppError> {
    let cohort = load_cohort(dataset)?;
    Ok(format!("dataset: {}\n{}", dataset.display(), validate_report(&cohort)))
}

/// Config file plus command-line overrides.
pub fn resolve(common: &Common) -> Result<RunConfig, AppError> {
    let mut c = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &common.dataset {
        c.dataset = d.clone();
    }
    if let Some(o) = &common.out {
        c.out = o.clone();
    }
    if let Some(r) = common.runs {
        c.runs = r;
    }
    if let Some(s) = common.seed_base {
        c.seed_base = s;
    }
    c.validate()?;
    Ok(c)
}

fn tasks_of(config: &RunConfig, cohort: &Cohort) -> Result<(Vec<String>, bool), AppError> {
    if config.tasks.is_empty() {
        return Ok((cohort.tasks().iter().map(|t| t.name.clone()).collect(), false));
    }
    for t in &config.tasks {
        if cohort.task(t).is_none() {
            return Err(AppError::validation(format!("unknown task '{t}'")));
        }
    }
    Ok((config.tasks.clone(), true))
}

/// Reports for every (task, pipeline) of the grid. Tasks that cannot be
/// evaluated are an error when requested explicitly and skipped otherwise.
pub fn evaluate_grid(
    pool: &rayon::ThreadPool,
    cohort: &Cohort,
    config: &RunConfig,
    tasks: &[String],
    strict: bool,
) -> Result<(Vec<TaskReport>, Vec<String>), AppError> {
    let mut reports = Vec::new();
    let mut notes = Vec::new();
    for task in tasks {
        for pipeline in config.pipelines()? {
            match runner::evaluate_task(pool, cohort, task, &config.eval(pipeline)?) {
                Ok(r) => reports.push(r),
                Err(mmscreen_core::Error::Invalid(m)) if !strict => {
                    notes.push(format!("skipped task {task}: {m}"));
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok((reports, notes))
}

fn target_kind(t: Target) -> &'static str {
    match t {
        Target::Fused(_) => "fusion",
        Target::Unimodal(_) => "unimodal",
    }
}

fn summary_cells(s: &MetricSummary) -> [String; 3] {
    if s.n_runs() == 0 {
        ["NA".into(), "NA".into(), "0".into()]
    } else {
        [fmt6(s.mean), fmt6(s.ci_half_width), s.n_runs().to_string()]
    }
}

pub fn results_table(reports: &[TaskReport]) -> Table {
    let mut t = Table::new(&[
        "task", "pipeline", "kind", "target", "learner", "metric", "mean", "ci_half_width", "n_runs",
        "skipped_folds", "auroc_na_folds", "hmm_truncations", "excluded_missing_series", "aggregation",
    ]);
    for r in reports {
        for ((target, metric), s) in &r.summaries {
            let learner = match target {
                Target::Fused(_) => r.pipeline.to_string(),
                Target::Unimodal(m) => r
                    .folds
                    .iter()
                    .find_map(|f| f.result())
                    .and_then(|f| f.members.iter().position(|x| x == m).map(|i| f.learners[i].to_string()))
                    .unwrap_or_else(|| "NA".into()),
            };
            let [mean, ci, n] = summary_cells(s);
            t.push(vec![
                r.task.clone(),
                r.pipeline.to_string(),
                target_kind(*target).into(),
                match target {
                    Target::Fused(rule) => rule.to_string(),
                    Target::Unimodal(m) => m.to_string(),
                },
                learner,
                metric.name().into(),
                mean,
                ci,
                n,
                r.skipped_folds.to_string(),
                r.auroc_na.get(target).copied().unwrap_or(0).to_string(),
                r.hmm_truncations.to_string(),
                r.missing_series.to_string(),
                AGGREGATION.into(),
            ]);
        }
    }
    t
}

pub fn predictions_table(cohort: &Cohort, reports: &[TaskReport]) -> Table {
    let mut t = Table::new(&["task", "pipeline", "run", "fold", "participant", "label", "target", "score", "prediction"]);
    let b = |v: bool| if v { "1" } else { "0" }.to_string();
    for r in reports {
        for f in r.folds.iter().filter_map(|f| f.result()) {
            for (k, &i) in f.test.iter().enumerate() {
                let id = &cohort.participants()[i].id;
                let base = [r.task.clone(), r.pipeline.to_string(), f.run.to_string(), f.fold.to_string(), id.clone(), b(f.labels[k])];
                for (rule, fused) in &f.fused {
                    let mut row = base.to_vec();
                    row.extend([rule.to_string(), fmt6(fused[k].score), b(fused[k].label)]);
                    t.push(row);
                }
                for (m, probs) in f.members.iter().zip(&f.member_probs) {
                    let mut row = base.to_vec();
                    row.extend([m.to_string(), fmt6(probs[k]), b(vote(probs[k]))]);
                    t.push(row);
                }
            }
        }
    }
    t
}

fn load(config: &RunConfig) -> Result<Cohort, AppError> {
    Ok(load_cohort(&config.dataset)?)
}

fn commit(config: &RunConfig, command: &str, manifest_name: &str, mut outputs: OutputSet) -> Result<Vec<PathBuf>, AppError> {
    let manifest = Manifest::new(command, config, config.seed_base, &config.dataset, &outputs)?.to_bytes()?;
    outputs.add(manifest_name, manifest);
    Ok(outputs.commit(&config.out)?)
}

fn listing(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| format!("wrote {}\n", p.display())).collect()
}

pub fn cmd_evaluate(common: &Common) -> Result<String, AppError> {
    let config = resolve(common)?;
    let cohort = load(&config)?;
    let (tasks, strict) = tasks_of(&config, &cohort)?;
    let pool = runner::thread_pool(common.threads)?;
    let (reports, notes) = evaluate_grid(&pool, &cohort, &config, &tasks, strict)?;
    if reports.is_empty() {
        return Err(AppError::validation(format!("no task could be evaluated: {}", notes.join("; "))));
    }
    let mut out = OutputSet::default();
    out.add(RESULTS_FILE, results_table(&reports).to_bytes()?);
    out.add(PREDICTIONS_FILE, predictions_table(&cohort, &reports).to_bytes()?);
    let written = commit(&config, "evaluate", "evaluate.manifest.json", out)?;
    let mut msg: String = notes.iter().map(|n| format!("{n}\n")).collect();
    msg.push_str(&listing(&written));
    Ok(msg)
}

/// Best (pipeline, fusion rule) by mean fused AUROC; ties keep the first in
/// canonical order.
pub fn best_of_reports(reports: &[TaskReport], task: &str) -> Option<(Pipeline, FusionRule)> {
    let mut best: Option<(Pipeline, FusionRule, f64)> = None;
    for r in reports.iter().filter(|r| r.task == task) {
        for ((target, metric), s) in &r.summaries {
            if let (Target::Fused(rule), Metric::Auroc) = (target, metric) {
                if s.n_runs() > 0 && best.is_none_or(|b| s.mean > b.2) {
                    best = Some((r.pipeline, *rule, s.mean));
                }
            }
        }
    }
    best.map(|(p, r, _)| (p, r))
}

/// Same selection from a results table written by `evaluate`.
pub fn best_of_results_csv(path: &Path, task: &str) -> anyhow::Result<Option<(Pipeline, FusionRule)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut best: Option<(Pipeline, FusionRule, f64)> = None;
    for rec in rdr.records() {
        let rec = rec?;
        if &rec[0] != task || &rec[2] != "fusion" || &rec[5] != "AUROC" {
            continue;
        }
        let Ok(mean) = rec[6].parse::<f64>() else { continue };
        let p: Pipeline = rec[1].parse().map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let r: FusionRule = rec[3].parse().map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        if best.is_none_or(|b| mean > b.2) {
            best = Some((p, r, mean));
        }
    }
    Ok(best.map(|(p, r, _)| (p, r)))
}

fn select_pipeline(
    pool: &rayon::ThreadPool,
    cohort: &Cohort,
    config: &RunConfig,
    task: &str,
) -> Result<(Pipeline, FusionRule, &'static str), AppError> {
    if cohort.task(task).is_none() {
        return Err(AppError::validation(format!("unknown task '{task}'")));
    }
    let results = config.out.join(RESULTS_FILE);
    if results.is_file() {
        if let Some((p, r)) = best_of_results_csv(&results, task)? {
            return Ok((p, r, "results table"));
        }
    }
    let (reports, _) = evaluate_grid(pool, cohort, config, &[task.to_string()], true)?;
    let (p, r) = best_of_reports(&reports, task).ok_or_else(|| AppError::runtime(format!("task {task}: no fused AUROC is defined")))?;
    Ok((p, r, "evaluated on the fly"))
}

pub fn shares_table(task: &str, pipeline: Pipeline, report: &ShapReport) -> Table {
    let mut t = Table::new(&[
        "task", "pipeline", "rule", "rank", "feature_set", "biomarker", "share", "ci_half_width", "n_runs",
        "permutations", "background", "seed_base", "skipped_folds",
    ]);
    let mut order: Vec<usize> = (0..report.modalities.len()).collect();
    order.sort_by(|&a, &b| report.global[b].total_cmp(&report.global[a]).then(a.cmp(&b)));
    for (rank, &k) in order.iter().enumerate() {
        let m = report.modalities[k];
        let per_run = report.run_shares.iter().map(|r| r[k]).collect();
        let s = MetricSummary::from_runs(per_run);
        t.push(vec![
            task.into(),
            pipeline.to_string(),
            report.rule.to_string(),
            (rank + 1).to_string(),
            m.to_string(),
            m.biomarker().to_string(),
            fmt6(report.global[k]),
            fmt6(s.ci_half_width),
            s.n_runs().to_string(),
            report.permutations.to_string(),
            report.background.into(),
            report.seed_base.to_string(),
            report.skipped_folds.to_string(),
        ]);
    }
    t
}

pub fn biomarker_table(task: &str, report: &ShapReport) -> Table {
    let mut t = Table::new(&["task", "biomarker", "share"]);
    let shares = biomarker_shares(&report.modalities, &report.global);
    let mut v: Vec<_> = shares.into_iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (b, s) in v {
        t.push(vec![task.into(), b.to_string(), fmt6(s)]);
    }
    t
}

pub fn cmd_explain(common: &Common, task: &str) -> Result<String, AppError> {
    let config = resolve(common)?;
    if !config.attribution.enabled {
        return Err(AppError::validation("attribution is disabled in the run configuration"));
    }
    let cohort = load(&config)?;
    let pool = runner::thread_pool(common.threads)?;
    let (pipeline, rule, source) = select_pipeline(&pool, &cohort, &config, task)?;
    let report =
        runner::explain_task(&pool, &cohort, task, &config.eval(pipeline)?, rule, config.attribution.permutations)?;
    let mut out = OutputSet::default();
    out.add(format!("modality_shares_{task}.csv"), shares_table(task, pipeline, &report).to_bytes()?);
    out.add(format!("biomarker_shares_{task}.csv"), biomarker_table(task, &report).to_bytes()?);
    let written = commit(&config, "explain", &format!("explain_{task}.manifest.json"), out)?;
    Ok(format!("explaining {pipeline} / {rule} (selected from {source})\n{}", listing(&written)))
}

pub fn fairness_tables(audit: &AuditRun, pipeline: Pipeline, mitigation: bool) -> (Table, Table) {
    let mut summary = Table::new(&[
        "task", "pipeline", "rule", "attribute", "phase", "metric", "mean", "ci_half_width", "n_runs", "na_folds",
        "four_fifths",
    ]);
    let mut groups = Table::new(&[
        "task", "attribute", "phase", "group", "tpr", "fpr", "selection_rate", "f1", "mean_n", "mean_threshold",
    ]);
    let phases: &[Phase] = if mitigation { &[Phase::Pre, Phase::Post] } else { &[Phase::Pre] };
    for &a in &audit.attributes {
        let thresholds = audit.mean_thresholds(a);
        for &phase in phases {
            for metric in FAIRNESS_METRICS {
                let s = audit.summarize(a, phase, metric);
                let [mean, ci, n] = summary_cells(&s.summary);
                let verdict = match (metric, s.summary.n_runs()) {
                    ("EOR" | "DPR", n) if n > 0 => {
                        if four_fifths(s.summary.mean) { "fair" } else { "unfair" }
                    }
                    ("EOR" | "DPR", _) => "NA",
                    _ => "",
                };
                summary.push(vec![
                    audit.task.clone(),
                    pipeline.to_string(),
                    audit.rule.to_string(),
                    a.to_string(),
                    phase.name().into(),
                    metric.into(),
                    mean,
                    ci,
                    n,
                    s.na_folds.to_string(),
                    verdict.into(),
                ]);
            }
            for (g, [tpr, fpr, sr, f1, n]) in audit.group_means(a, phase) {
                let th = match phase {
                    Phase::Pre => "0.5".to_string(),
                    Phase::Post => thresholds.get(&g).map(|v| fmt6(*v)).unwrap_or_else(|| "NA".into()),
                };
                groups.push(vec![
                    audit.task.clone(),
                    a.to_string(),
                    phase.name().into(),
                    g,
                    fmt_opt(tpr),
                    fmt_opt(fpr),
                    fmt_opt(sr),
                    fmt_opt(f1),
                    fmt_opt(n),
                    th,
                ]);
            }
        }
    }
    (summary, groups)
}

pub fn cmd_audit(common: &Common, task: &str) -> Result<String, AppError> {
    let config = resolve(common)?;
    let cohort = load(&config)?;
    let pool = runner::thread_pool(common.threads)?;
    let attributes = config.attributes()?;
    if attributes.is_empty() {
        return Err(AppError::validation("fairness.attributes is empty"));
    }
    let (pipeline, rule, source) = select_pipeline(&pool, &cohort, &config, task)?;
    let eo = config.eo();
    let mitigation = config.fairness.mitigation.then_some(&eo);
    let audit = runner::audit_task(&pool, &cohort, task, &config.eval(pipeline)?, rule, &attributes, mitigation)?;
    let (summary, groups) = fairness_tables(&audit, pipeline, mitigation.is_some());
    let mut out = OutputSet::default();
    out.add(format!("fairness_{task}.csv"), summary.to_bytes()?);
    out.add(format!("fairness_groups_{task}.csv"), groups.to_bytes()?);
    let written = commit(&config, "audit", &format!("audit_{task}.manifest.json"), out)?;
    Ok(format!("auditing {pipeline} / {rule} (selected from {source})\n{}", listing(&written)))
}

/// Groups present in the cohort per sensitive attribute.
pub fn groups_by_attribute(cohort: &Cohort) -> BTreeMap<String, Vec<String>> {
    mmscreen_core::cohort::SensitiveAttribute::ALL
        .iter()
        .map(|&a| {
            let mut g: Vec<String> = cohort
                .participants()
                .iter()
                .map(|p| mmscreen_core::cohort::bin_sensitive(p, a, cohort.sensitive()).to_string())
                .collect();
            g.sort();
            g.dedup();
            (a.to_string(), g)
        })
        .collect()
}
