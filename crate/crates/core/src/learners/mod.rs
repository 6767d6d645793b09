//! The shallow classifier zoo behind one fit / predict contract.

mod forest;
mod gbdt;
mod logistic;
mod standardize;
mod svm;
pub mod tree;

pub use forest::{fit_rf, ForestModel, RfParams};
pub use gbdt::{fit_gbdt, GbdtModel, GbdtParams};
pub use logistic::{fit_lr, logistic_objective, LogisticModel, LrParams};
pub use standardize::Standardizer;
pub use svm::{fit_svm, platt_fit, scale_gamma, Gamma, SvmModel, SvmParams};

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LearnerKind {
    Lr,
    Gbdt,
    Svm,
    Rf,
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Lr => "LR",
            LearnerKind::Gbdt => "GBDT",
            LearnerKind::Svm => "SVM",
            LearnerKind::Rf => "RF",
        })
    }
}

/// Hyperparameters for every learner kind.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LearnerParams {
    #[serde(default)]
    pub lr: LrParams,
    #[serde(default)]
    pub gbdt: GbdtParams,
    #[serde(default)]
    pub svm: SvmParams,
    #[serde(default)]
    pub rf: RfParams,
}

/// A learner kind with its hyperparameters and seed (`42 + run index` in the
/// evaluation harness).
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub params: LearnerParams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedModel {
    Lr(LogisticModel),
    Gbdt(GbdtModel),
    Svm(SvmModel),
    Rf(ForestModel),
}

/// Binary classifier returning the positive-class probability.
pub trait ProbabilisticClassifier {
    fn predict_row(&self, x: &[f64]) -> f64;

    fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

impl ProbabilisticClassifier for FittedModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        let p = match self {
            FittedModel::Lr(m) => m.predict_row(x),
            FittedModel::Gbdt(m) => m.predict_row(x),
            FittedModel::Svm(m) => m.predict_row(x),
            FittedModel::Rf(m) => m.predict_row(x),
        };
        p.clamp(0.0, 1.0)
    }
}

impl FittedModel {
    pub fn kind(&self) -> LearnerKind {
        match self {
            FittedModel::Lr(_) => LearnerKind::Lr,
            FittedModel::Gbdt(_) => LearnerKind::Gbdt,
            FittedModel::Svm(_) => LearnerKind::Svm,
            FittedModel::Rf(_) => LearnerKind::Rf,
        }
    }

    /// `(P(negative), P(positive))` per row.
    pub fn predict_both(&self, x: &Matrix) -> Vec<(f64, f64)> {
        self.predict_proba(x).into_iter().map(|p| (1.0 - p, p)).collect()
    }
}

/// Fits any learner; a single-class `y` is a degenerate fold.
pub fn fit(x: &Matrix, y: &[bool], spec: &LearnerSpec) -> Result<FittedModel> {
    if x.rows() != y.len() {
        return Err(Error::Dimension { expected: x.rows(), found: y.len() });
    }
    let pos = y.iter().filter(|v| **v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateFold);
    }
    Ok(match spec.kind {
        LearnerKind::Lr => FittedModel::Lr(fit_lr(x, y, &spec.params.lr)),
        LearnerKind::Gbdt => FittedModel::Gbdt(fit_gbdt(x, y, &spec.params.gbdt)),
        LearnerKind::Svm => FittedModel::Svm(fit_svm(x, y, &spec.params.svm)),
        LearnerKind::Rf => FittedModel::Rf(fit_rf(x, y, &spec.params.rf, spec.seed)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [LearnerKind; 4] = [LearnerKind::Lr, LearnerKind::Gbdt, LearnerKind::Svm, LearnerKind::Rf];

    fn spec(kind: LearnerKind) -> LearnerSpec {
        LearnerSpec { kind, params: LearnerParams::default(), seed: 42 }
    }

    fn data() -> (Matrix, Vec<bool>) {
        let rows: Vec<[f64; 2]> = (0..40).map(|i| [(i % 10) as f64, ((i * 7) % 13) as f64]).collect();
        let y = (0..40).map(|i| (i % 10) >= 5).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        for k in KINDS {
            assert_eq!(fit(&x, &[true, true], &spec(k)), Err(Error::DegenerateFold));
        }
    }

    #[test]
    fn shared_contract() {
        let (x, y) = data();
        for k in KINDS {
            let a = fit(&x, &y, &spec(k)).unwrap();
            let b = fit(&x, &y, &spec(k)).unwrap();
            assert_eq!(a, b, "{k} not deterministic");
            assert_eq!(a.kind(), k);
            for (n, p) in a.predict_both(&x) {
                assert!((0.0..=1.0).contains(&p));
                assert!((n + p - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn one_binary_feature_is_ranked_perfectly() {
        let rows: Vec<[f64; 2]> = (0..30).map(|i| [(i % 2) as f64, ((i * 5) % 7) as f64]).collect();
        let y: Vec<bool> = (0..30).map(|i| i % 2 == 1).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let params = LearnerParams { gbdt: GbdtParams { n_trees: 2, ..GbdtParams::default() }, ..Default::default() };
        let m = fit(&x, &y, &LearnerSpec { kind: LearnerKind::Gbdt, params, seed: 0 }).unwrap();
        let p = m.predict_proba(&x);
        let auc = crate::evaluation::auroc(&p, &y).unwrap();
        assert_eq!(auc, 1.0);
    }
}
