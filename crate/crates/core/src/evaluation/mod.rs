//! Repeated nested cross-validation with leakage-safe per-fold refitting.

mod folds;
mod harness;
mod metrics;

pub use folds::{chunk_sizes, make_folds, FoldPlan, FOLDS, SEED_BASE};
pub use harness::{
    aggregate, evaluate_fold, fit_fold, prepare, run_task, EvalConfig, FittedFold, FittedMember, FoldOutcome,
    FoldResult, FusedModel, Summarizer, Target, TaskData, TaskReport,
};
pub use metrics::{accuracy, auroc, class_f1, macro_f1, Metric, MetricSummary};
