//! Modality feature sets, learner routing, and late-fusion rules.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::FeatureSet;
use crate::error::{invalid, Error, Result};
use crate::learners::LearnerKind;
use crate::temporal::SummaryKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Biomarker {
    Demographics,
    Facial,
    Cardiovascular,
    Audio,
    Language,
}

impl fmt::Display for Biomarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Biomarker::Demographics => "Demographics",
            Biomarker::Facial => "Facial",
            Biomarker::Cardiovascular => "Cardiovascular",
            Biomarker::Audio => "Audio",
            Biomarker::Language => "Language",
        })
    }
}

/// One of the twelve summarised feature sets a per-feature classifier is
/// trained on. Declaration order is the canonical order used for tie-breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    Demographics,
    Dinov2,
    EmotionAus,
    EmotionAusHmm,
    Rppg,
    RppgHmm,
    Wavlm,
    Acoustic,
    AcousticHmm,
    Llama,
    Roberta,
    RobertaHmm,
}

impl Modality {
    pub const ALL: [Modality; 12] = [
        Modality::Demographics,
        Modality::Dinov2,
        Modality::EmotionAus,
        Modality::EmotionAusHmm,
        Modality::Rppg,
        Modality::RppgHmm,
        Modality::Wavlm,
        Modality::Acoustic,
        Modality::AcousticHmm,
        Modality::Llama,
        Modality::Roberta,
        Modality::RobertaHmm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Demographics => "Demographics",
            Modality::Dinov2 => "DINOv2",
            Modality::EmotionAus => "Emotion+AUs",
            Modality::EmotionAusHmm => "Emotion+AUs+HMM",
            Modality::Rppg => "rPPG",
            Modality::RppgHmm => "rPPG+HMM",
            Modality::Wavlm => "WavLM",
            Modality::Acoustic => "Acoustic",
            Modality::AcousticHmm => "Acoustic+HMM",
            Modality::Llama => "LLaMA",
            Modality::Roberta => "RoBERTa Sentiment",
            Modality::RobertaHmm => "RoBERTa Sentiment+HMM",
        }
    }

    pub fn source(self) -> FeatureSet {
        match self {
            Modality::Demographics => FeatureSet::Demographics,
            Modality::Dinov2 => FeatureSet::Dinov2,
            Modality::EmotionAus | Modality::EmotionAusHmm => FeatureSet::EmotionAus,
            Modality::Rppg | Modality::RppgHmm => FeatureSet::Rppg,
            Modality::Wavlm => FeatureSet::Wavlm,
            Modality::Acoustic | Modality::AcousticHmm => FeatureSet::Acoustic,
            Modality::Llama => FeatureSet::Llama,
            Modality::Roberta | Modality::RobertaHmm => FeatureSet::RobertaSentiment,
        }
    }

    pub fn summary(self) -> SummaryKind {
        match self {
            Modality::Demographics | Modality::Llama => SummaryKind::Raw,
            Modality::Rppg => SummaryKind::Quantiles,
            Modality::EmotionAusHmm | Modality::RppgHmm | Modality::AcousticHmm | Modality::RobertaHmm => {
                SummaryKind::HmmDynamics
            }
            _ => SummaryKind::Stats,
        }
    }

    pub fn biomarker(self) -> Biomarker {
        match self.source() {
            FeatureSet::Demographics => Biomarker::Demographics,
            FeatureSet::Dinov2 | FeatureSet::EmotionAus => Biomarker::Facial,
            FeatureSet::Rppg => Biomarker::Cardiovascular,
            FeatureSet::Wavlm | FeatureSet::Acoustic => Biomarker::Audio,
            FeatureSet::Llama | FeatureSet::RobertaSentiment => Biomarker::Language,
        }
    }

    /// Modalities derivable from the given raw feature sets.
    pub fn available(sets: &[FeatureSet]) -> Vec<Modality> {
        Modality::ALL.into_iter().filter(|m| sets.contains(&m.source())).collect()
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = Modality::ALL.iter().map(|m| m.name()).collect();
            invalid(format!("unknown modality feature set '{s}'; valid names: {}", valid.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pipeline {
    #[serde(rename = "LRGBDT")]
    LrGbdt,
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "RF")]
    Rf,
}

impl Pipeline {
    pub const ALL: [Pipeline; 3] = [Pipeline::LrGbdt, Pipeline::Svm, Pipeline::Rf];
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pipeline::LrGbdt => "LRGBDT",
            Pipeline::Svm => "SVM",
            Pipeline::Rf => "RF",
        })
    }
}

impl FromStr for Pipeline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LRGBDT" => Ok(Pipeline::LrGbdt),
            "SVM" => Ok(Pipeline::Svm),
            "RF" => Ok(Pipeline::Rf),
            other => Err(invalid(format!("unknown pipeline '{other}', expected LRGBDT, SVM or RF"))),
        }
    }
}

/// Summarised dimension from which the LR/GBDT pipeline switches to boosting.
pub const HIGH_DIM: usize = 100;

pub fn route(pipeline: Pipeline, summarized_dim: usize) -> LearnerKind {
    match pipeline {
        Pipeline::LrGbdt if summarized_dim < HIGH_DIM => LearnerKind::Lr,
        Pipeline::LrGbdt => LearnerKind::Gbdt,
        Pipeline::Svm => LearnerKind::Svm,
        Pipeline::Rf => LearnerKind::Rf,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FusionRule {
    Majority,
    AverageProb,
    Selective,
}

impl FusionRule {
    pub const ALL: [FusionRule; 3] = [FusionRule::Majority, FusionRule::AverageProb, FusionRule::Selective];
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionRule::Majority => "Majority",
            FusionRule::AverageProb => "AverageProb",
            FusionRule::Selective => "Selective",
        })
    }
}

impl FromStr for FusionRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FusionRule::ALL
            .into_iter()
            .find(|r| alloc::format!("{r}") == s)
            .ok_or_else(|| invalid(format!("unknown fusion rule '{s}', expected Majority, AverageProb or Selective")))
    }
}

/// Label assigned when a vote splits evenly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TiePolicy {
    #[default]
    Positive,
    Negative,
}

/// A fused decision and the continuous score used for AUROC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fused {
    pub label: bool,
    pub score: f64,
}

/// Per-feature hard vote from a positive-class probability.
pub fn vote(prob: f64) -> bool {
    prob >= 0.5
}

/// Majority over hard votes; score = fraction of positive votes.
pub fn fuse_majority(votes: &[bool], tie: TiePolicy) -> Fused {
    let pos = votes.iter().filter(|v| **v).count();
    let neg = votes.len() - pos;
    let label = match pos.cmp(&neg) {
        core::cmp::Ordering::Greater => true,
        core::cmp::Ordering::Less => false,
        core::cmp::Ordering::Equal => tie == TiePolicy::Positive,
    };
    let score = if votes.is_empty() { 0.5 } else { pos as f64 / votes.len() as f64 };
    Fused { label, score }
}

/// Mean positive-class probability; positive iff the mean is at least 0.5.
pub fn fuse_average(probs: &[f64]) -> Fused {
    let score = crate::math::mean(probs);
    Fused { label: score >= 0.5, score }
}

/// Members whose validation AUROC strictly exceeds 0.5; if none do, the
/// single member with the highest validation AUROC (earliest in canonical
/// order on ties, missing AUROCs ranked last).
pub fn select_members(val_auc: &BTreeMap<Modality, Option<f64>>) -> Vec<Modality> {
    let chosen: Vec<Modality> =
        val_auc.iter().filter(|(_, a)| matches!(a, Some(v) if *v > 0.5)).map(|(m, _)| *m).collect();
    if !chosen.is_empty() {
        return chosen;
    }
    let mut best: Option<(Modality, f64)> = None;
    for (m, a) in val_auc {
        let v = a.unwrap_or(f64::NEG_INFINITY);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((*m, v));
        }
    }
    best.map(|(m, _)| alloc::vec![m]).unwrap_or_default()
}

/// Majority vote restricted to [`select_members`].
pub fn fuse_selective(
    val_auc: &BTreeMap<Modality, Option<f64>>,
    votes: &BTreeMap<Modality, bool>,
    tie: TiePolicy,
) -> (Fused, Vec<Modality>) {
    let selected = select_members(val_auc);
    let v: Vec<bool> = selected.iter().filter_map(|m| votes.get(m).copied()).collect();
    (fuse_majority(&v, tie), selected)
}

/// Applies a rule to one sample's member probabilities (in member order).
/// `selected` masks members for [`FusionRule::Selective`].
pub fn fuse(rule: FusionRule, probs: &[f64], selected: &[bool], tie: TiePolicy) -> Fused {
    match rule {
        FusionRule::AverageProb => fuse_average(probs),
        FusionRule::Majority => {
            let votes: Vec<bool> = probs.iter().map(|&p| vote(p)).collect();
            fuse_majority(&votes, tie)
        }
        FusionRule::Selective => {
            let votes: Vec<bool> =
                probs.iter().zip(selected).filter(|(_, s)| **s).map(|(&p, _)| vote(p)).collect();
            fuse_majority(&votes, tie)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn routing_table() {
        assert_eq!(route(Pipeline::LrGbdt, 2 * 17), LearnerKind::Lr);
        assert_eq!(route(Pipeline::LrGbdt, 2048), LearnerKind::Gbdt);
        assert_eq!(route(Pipeline::LrGbdt, 100), LearnerKind::Gbdt);
        assert_eq!(route(Pipeline::LrGbdt, 99), LearnerKind::Lr);
        for d in [1, 50, 5000] {
            assert_eq!(route(Pipeline::Rf, d), LearnerKind::Rf);
            assert_eq!(route(Pipeline::Svm, d), LearnerKind::Svm);
        }
        assert!("Video".parse::<Modality>().is_err());
    }

    #[test]
    fn twelve_modalities() {
        assert_eq!(Modality::ALL.len(), 12);
        for m in Modality::ALL {
            assert_eq!(m.name().parse::<Modality>().unwrap(), m);
        }
    }

    #[test]
    fn majority_examples() {
        let f = fuse_majority(&[true, true, false], TiePolicy::Positive);
        assert!(f.label);
        assert!((f.score - 2.0 / 3.0).abs() < 1e-15);
        let f = fuse_majority(&[true, false], TiePolicy::Positive);
        assert!(f.label);
        assert_eq!(f.score, 0.5);
        let f = fuse_majority(&[false, true, false, true, false], TiePolicy::Positive);
        assert!(!f.label);
        assert_eq!(f.score, 0.4);
    }

    #[test]
    fn average_examples() {
        let f = fuse_average(&[0.9, 0.1]);
        assert!(f.label && (f.score - 0.5).abs() < 1e-15);
        let f = fuse_average(&[0.6, 0.6, 0.6]);
        assert!(f.label && (f.score - 0.6).abs() < 1e-15);
        let f = fuse_average(&[0.2, 0.3, 0.9]);
        assert!(!f.label && (f.score - 0.4667).abs() < 1e-4);
    }

    #[test]
    fn selective_examples() {
        let aucs: BTreeMap<Modality, Option<f64>> = [
            (Modality::Acoustic, Some(0.62)),
            (Modality::Rppg, Some(0.48)),
            (Modality::Wavlm, Some(0.55)),
        ]
        .into_iter()
        .collect();
        assert_eq!(select_members(&aucs), vec![Modality::Wavlm, Modality::Acoustic]);

        let flat: BTreeMap<Modality, Option<f64>> =
            [(Modality::Acoustic, Some(0.5)), (Modality::Rppg, Some(0.5))].into_iter().collect();
        assert_eq!(select_members(&flat), vec![Modality::Rppg]);

        let two: BTreeMap<Modality, Option<f64>> =
            [(Modality::Acoustic, Some(0.7)), (Modality::Rppg, Some(0.6))].into_iter().collect();
        let votes: BTreeMap<Modality, bool> =
            [(Modality::Acoustic, false), (Modality::Rppg, true)].into_iter().collect();
        let (f, _) = fuse_selective(&two, &votes, TiePolicy::Positive);
        assert!(f.label);
    }

    proptest! {
        #[test]
        fn rules_are_order_invariant(probs in prop::collection::vec(0.0f64..=1.0, 1..12), rot in 0usize..12) {
            let mut r = probs.clone();
            r.rotate_left(rot % probs.len());
            let mask = vec![true; probs.len()];
            for rule in FusionRule::ALL {
                let a = fuse(rule, &probs, &mask, TiePolicy::Positive);
                let b = fuse(rule, &r, &mask, TiePolicy::Positive);
                prop_assert_eq!(a.label, b.label);
                prop_assert!((a.score - b.score).abs() < 1e-12);
            }
        }

        #[test]
        fn identical_probabilities_average_exactly(p in 0.0f64..=1.0, n in 1usize..20) {
            let f = fuse_average(&vec![p; n]);
            prop_assert!((f.score - p).abs() <= 4.0 * f64::EPSILON);
        }

        #[test]
        fn flipping_a_vote_up_never_lowers_score(votes in prop::collection::vec(any::<bool>(), 1..15), i in 0usize..15) {
            let i = i % votes.len();
            let before = fuse_majority(&votes, TiePolicy::Positive);
            let mut up = votes.clone();
            up[i] = true;
            let after = fuse_majority(&up, TiePolicy::Positive);
            prop_assert!(after.score >= before.score);
            prop_assert!(after.label || !before.label);
        }

        #[test]
        fn selective_with_all_good_is_majority(aucs in prop::collection::vec(0.501f64..1.0, 12), votes in prop::collection::vec(any::<bool>(), 12)) {
            let a: BTreeMap<Modality, Option<f64>> = Modality::ALL.iter().zip(&aucs).map(|(m, v)| (*m, Some(*v))).collect();
            let v: BTreeMap<Modality, bool> = Modality::ALL.iter().zip(&votes).map(|(m, v)| (*m, *v)).collect();
            let (s, sel) = fuse_selective(&a, &v, TiePolicy::Positive);
            prop_assert_eq!(sel.len(), 12);
            prop_assert_eq!(s, fuse_majority(&votes, TiePolicy::Positive));
        }
    }
}
