//! Participants, their feature series, outcome labelling and sensitive groups.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sex {
    F,
    M,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Diagnosis {
    NC,
    MCI,
}

impl FromStr for Sex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "F" => Ok(Sex::F),
            "M" => Ok(Sex::M),
            other => Err(invalid(format!("unknown sex '{other}', expected F or M"))),
        }
    }
}

impl FromStr for Diagnosis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "NC" => Ok(Diagnosis::NC),
            "MCI" => Ok(Diagnosis::MCI),
            other => Err(invalid(format!("unknown diagnosis '{other}', expected NC or MCI"))),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::F => "F",
            Sex::M => "M",
        })
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Diagnosis::NC => "NC",
            Diagnosis::MCI => "MCI",
        })
    }
}

/// Outcome name whose value is derived from the clinical diagnosis when the
/// participants table carries no explicit column: 1 = normal cognition, 0 = MCI.
pub const NORMAL_COGNITION: &str = "NormalCognition";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: String,
    pub age: f64,
    pub sex: Sex,
    pub years_education: u32,
    pub diagnosis: Diagnosis,
    /// Outcome scores keyed by outcome name; absent entries are missing.
    pub scores: BTreeMap<String, f64>,
}

impl ParticipantRecord {
    /// Score for an outcome, falling back to the diagnosis encoding for
    /// [`NORMAL_COGNITION`].
    pub fn outcome(&self, name: &str) -> Option<f64> {
        match self.scores.get(name) {
            Some(v) => Some(*v),
            None if name == NORMAL_COGNITION => Some(match self.diagnosis {
                Diagnosis::NC => 1.0,
                Diagnosis::MCI => 0.0,
            }),
            None => None,
        }
    }
}

/// Raw per-participant feature sources as delivered by upstream extractors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    EmotionAus,
    Dinov2,
    Rppg,
    Acoustic,
    Wavlm,
    RobertaSentiment,
    Llama,
    Demographics,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 8] = [
        FeatureSet::EmotionAus,
        FeatureSet::Dinov2,
        FeatureSet::Rppg,
        FeatureSet::Acoustic,
        FeatureSet::Wavlm,
        FeatureSet::RobertaSentiment,
        FeatureSet::Llama,
        FeatureSet::Demographics,
    ];

    /// File stem used on disk.
    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::EmotionAus => "EmotionAUs",
            FeatureSet::Dinov2 => "DINOv2",
            FeatureSet::Rppg => "rPPG",
            FeatureSet::Acoustic => "Acoustic",
            FeatureSet::Wavlm => "WavLM",
            FeatureSet::RobertaSentiment => "RoBERTaSentiment",
            FeatureSet::Llama => "LLaMA",
            FeatureSet::Demographics => "Demographics",
        }
    }

    /// Whether the source is a single vector rather than a time series.
    pub fn is_static(self) -> bool {
        matches!(self, FeatureSet::Llama | FeatureSet::Demographics)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FeatureSet::ALL.into_iter().find(|fs| fs.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = FeatureSet::ALL.iter().map(|f| f.name()).collect();
            invalid(format!("unknown feature set '{s}'; valid names: {}", valid.join(", ")))
        })
    }
}

/// One multichannel series (`T x D`) for one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSeries {
    pub participant_id: String,
    pub feature_set: FeatureSet,
    pub channels: Vec<String>,
    pub data: Matrix,
    pub sample_rate_hint: Option<f64>,
}

impl FeatureSeries {
    pub fn new(participant_id: impl Into<String>, feature_set: FeatureSet, data: Matrix) -> Self {
        let channels = (0..data.cols()).map(|j| format!("c{j}")).collect();
        FeatureSeries {
            participant_id: participant_id.into(),
            feature_set,
            channels,
            data,
            sample_rate_hint: None,
        }
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    /// Positive iff score <= cutoff.
    Le,
    /// Positive iff score < cutoff.
    Lt,
    /// Positive iff score == 0.5 (CDR questionable dementia).
    EqHalf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub cutoff: f64,
    pub operator: Operator,
    #[serde(default)]
    pub positive_means: String,
}

impl TaskSpec {
    pub fn new(name: &str, cutoff: f64, operator: Operator, positive_means: &str) -> Self {
        TaskSpec { name: name.to_string(), cutoff, operator, positive_means: positive_means.to_string() }
    }

    /// The eight screening outcomes with their standard cutoffs.
    pub fn defaults() -> Vec<TaskSpec> {
        alloc::vec![
            TaskSpec::new("CDR", 0.5, Operator::EqHalf, "CDR = 0.5"),
            TaskSpec::new("MoCA", 24.0, Operator::Le, "MoCA <= 24"),
            TaskSpec::new(NORMAL_COGNITION, 0.5, Operator::Lt, "clinical diagnosis of MCI"),
            TaskSpec::new("LSNS6", 12.0, Operator::Le, "LSNS-6 <= 12 (social isolation)"),
            TaskSpec::new("Neuroticism", 16.0, Operator::Lt, "neuroticism < 16"),
            TaskSpec::new("NegativeAffect", 44.10, Operator::Lt, "negative affect < 44.10"),
            TaskSpec::new("SocialSatisfaction", 48.66, Operator::Lt, "social satisfaction < 48.66"),
            TaskSpec::new("PsychologicalWellBeing", 53.70, Operator::Lt, "psychological well-being < 53.70"),
        ]
    }

    fn validate(&self) -> Result<()> {
        if !self.cutoff.is_finite() {
            return Err(invalid(format!("task {}: cutoff must be finite", self.name)));
        }
        if self.operator == Operator::EqHalf && !self.name.eq_ignore_ascii_case("CDR") {
            return Err(invalid(format!("task {}: EqHalf operator is only valid for CDR", self.name)));
        }
        Ok(())
    }
}

/// `true` = positive (clinically flagged) class.
pub fn dichotomize(score: f64, spec: &TaskSpec) -> bool {
    match spec.operator {
        Operator::Le => score <= spec.cutoff,
        Operator::Lt => score < spec.cutoff,
        Operator::EqHalf => score == 0.5,
    }
}

/// Median of the observed scores for one outcome over the whole cohort.
///
/// The cutoff is computed once on all participants, so it does see every
/// fold's test participants.
pub fn median_cutoff(participants: &[ParticipantRecord], outcome: &str) -> Option<f64> {
    let mut v: Vec<f64> = participants.iter().filter_map(|p| p.outcome(outcome)).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SensitiveAttribute {
    Sex,
    AgeGroup,
    YoeGroup,
    Diagnosis,
}

impl SensitiveAttribute {
    pub const ALL: [SensitiveAttribute; 4] =
        [SensitiveAttribute::Sex, SensitiveAttribute::AgeGroup, SensitiveAttribute::YoeGroup, SensitiveAttribute::Diagnosis];

    pub fn name(self) -> &'static str {
        match self {
            SensitiveAttribute::Sex => "sex",
            SensitiveAttribute::AgeGroup => "age_group",
            SensitiveAttribute::YoeGroup => "yoe_group",
            SensitiveAttribute::Diagnosis => "diagnosis",
        }
    }
}

impl fmt::Display for SensitiveAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SensitiveAttribute {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SensitiveAttribute::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| invalid(format!("unknown sensitive attribute '{s}'")))
    }
}

/// Thresholds used to bin continuous attributes into groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveSpec {
    /// Ages `<=` this value form the lower group.
    pub age_threshold: f64,
    /// Years of education `<=` this value are "Below college".
    pub below_college_max: u32,
    /// Exactly this many years is "College graduate"; more is "Graduate+".
    pub college_years: u32,
}

impl Default for SensitiveSpec {
    fn default() -> Self {
        SensitiveSpec { age_threshold: 78.9, below_college_max: 15, college_years: 16 }
    }
}

pub const AGE_LOW: &str = "<= median";
pub const AGE_HIGH: &str = "> median";
pub const BELOW_COLLEGE: &str = "Below college";
pub const COLLEGE_GRADUATE: &str = "College graduate";
pub const GRADUATE_PLUS: &str = "Graduate+";

pub fn bin_sensitive(record: &ParticipantRecord, attribute: SensitiveAttribute, spec: &SensitiveSpec) -> &'static str {
    match attribute {
        SensitiveAttribute::Sex => match record.sex {
            Sex::F => "F",
            Sex::M => "M",
        },
        SensitiveAttribute::AgeGroup => {
            if record.age <= spec.age_threshold {
                AGE_LOW
            } else {
                AGE_HIGH
            }
        }
        SensitiveAttribute::YoeGroup => {
            let y = record.years_education;
            if y <= spec.below_college_max {
                BELOW_COLLEGE
            } else if y <= spec.college_years {
                COLLEGE_GRADUATE
            } else {
                GRADUATE_PLUS
            }
        }
        SensitiveAttribute::Diagnosis => match record.diagnosis {
            Diagnosis::NC => "NC",
            Diagnosis::MCI => "MCI",
        },
    }
}

/// One-hot + z-score encoder for the demographic block, fit on training records only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicEncoder {
    sexes: Vec<Sex>,
    ages: Vec<f64>,
    years: Vec<u32>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl DemographicEncoder {
    pub fn fit(train: &[ParticipantRecord]) -> Result<Self> {
        if train.is_empty() {
            return Err(invalid("demographic encoder needs at least one training record"));
        }
        let sexes: Vec<Sex> = train.iter().map(|r| r.sex).collect::<BTreeSet<_>>().into_iter().collect();
        let years: Vec<u32> =
            train.iter().map(|r| r.years_education).collect::<BTreeSet<_>>().into_iter().collect();
        let mut ages: Vec<f64> = train.iter().map(|r| r.age).collect();
        ages.sort_by(f64::total_cmp);
        ages.dedup_by(|a, b| a.to_bits() == b.to_bits());

        let mut enc = DemographicEncoder { sexes, ages, years, mean: Vec::new(), scale: Vec::new() };
        let raw: Vec<Vec<f64>> = train.iter().map(|r| enc.one_hot(r)).collect();
        let width = enc.width();
        for j in 0..width {
            let col: Vec<f64> = raw.iter().map(|r| r[j]).collect();
            let m = math::mean(&col);
            let s = math::population_std(&col);
            enc.mean.push(m);
            enc.scale.push(if s > 0.0 { s } else { 1.0 });
        }
        Ok(enc)
    }

    pub fn width(&self) -> usize {
        self.sexes.len() + self.ages.len() + self.years.len()
    }

    /// Concatenated one-hot blocks (sex, age, years of education) before
    /// scaling; an unseen category leaves its block all zero.
    pub fn one_hot(&self, r: &ParticipantRecord) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.width()];
        if let Some(i) = self.sexes.iter().position(|s| *s == r.sex) {
            v[i] = 1.0;
        }
        let off = self.sexes.len();
        if let Some(i) = self.ages.iter().position(|a| a.to_bits() == r.age.to_bits()) {
            v[off + i] = 1.0;
        }
        let off = off + self.ages.len();
        if let Some(i) = self.years.iter().position(|y| *y == r.years_education) {
            v[off + i] = 1.0;
        }
        v
    }

    pub fn encode(&self, r: &ParticipantRecord) -> Vec<f64> {
        let mut v = self.one_hot(r);
        for (j, x) in v.iter_mut().enumerate() {
            *x = (*x - self.mean[j]) / self.scale[j];
        }
        v
    }

    /// Block boundaries `(sex, age, years)` as column counts.
    pub fn block_widths(&self) -> (usize, usize, usize) {
        (self.sexes.len(), self.ages.len(), self.years.len())
    }
}

/// Convenience wrapper: fit on `train` and encode `record`.
pub fn encode_demographics(train: &[ParticipantRecord], record: &ParticipantRecord) -> Result<Vec<f64>> {
    Ok(DemographicEncoder::fit(train)?.encode(record))
}

/// A validated, immutable cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    participants: Vec<ParticipantRecord>,
    series: BTreeMap<(String, FeatureSet), FeatureSeries>,
    tasks: Vec<TaskSpec>,
    sensitive: SensitiveSpec,
}

impl Cohort {
    pub fn new(
        participants: Vec<ParticipantRecord>,
        series: Vec<FeatureSeries>,
        tasks: Vec<TaskSpec>,
        sensitive: SensitiveSpec,
    ) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for p in &participants {
            if !ids.insert(p.id.as_str()) {
                return Err(invalid(format!("duplicate participant id '{}'", p.id)));
            }
            if !(p.age.is_finite() && p.age > 0.0) {
                return Err(invalid(format!("participant {}: age must be positive", p.id)));
            }
            if let Some((k, _)) = p.scores.iter().find(|(_, v)| !v.is_finite()) {
                return Err(invalid(format!("participant {}: score {k} is not finite", p.id)));
            }
        }
        for t in &tasks {
            t.validate()?;
        }
        let mut dims: BTreeMap<FeatureSet, usize> = BTreeMap::new();
        let mut map = BTreeMap::new();
        for s in series {
            if !ids.contains(s.participant_id.as_str()) {
                return Err(invalid(format!(
                    "{} series references unknown participant '{}'",
                    s.feature_set, s.participant_id
                )));
            }
            if s.data.rows() == 0 {
                return Err(invalid(format!("{}/{}: series has no time steps", s.participant_id, s.feature_set)));
            }
            if s.feature_set.is_static() && s.data.rows() != 1 {
                return Err(invalid(format!(
                    "{}/{}: non-temporal feature set must have exactly one row",
                    s.participant_id, s.feature_set
                )));
            }
            if !s.data.is_finite() {
                return Err(invalid(format!("{}/{}: series holds non-finite values", s.participant_id, s.feature_set)));
            }
            let d = *dims.entry(s.feature_set).or_insert(s.dim());
            if d != s.dim() {
                return Err(invalid(format!(
                    "{}/{}: {} channels, but this feature set has {d} elsewhere",
                    s.participant_id,
                    s.feature_set,
                    s.dim()
                )));
            }
            let key = (s.participant_id.clone(), s.feature_set);
            if map.insert(key, s).is_some() {
                return Err(invalid("duplicate (participant, feature set) series"));
            }
        }
        Ok(Cohort { participants, series: map, tasks, sensitive })
    }

    pub fn participants(&self) -> &[ParticipantRecord] {
        &self.participants
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn task(&self, name: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.name == name)
    }

    pub fn sensitive(&self) -> &SensitiveSpec {
        &self.sensitive
    }

    pub fn participant(&self, id: &str) -> Option<&ParticipantRecord> {
        self.participants.iter().find(|p| p.id == id)
    }

    pub fn series(&self, participant_id: &str, set: FeatureSet) -> Option<&FeatureSeries> {
        self.series.get(&(String::from(participant_id), set))
    }

    pub fn all_series(&self) -> impl Iterator<Item = &FeatureSeries> + '_ {
        self.series.values()
    }

    /// Feature sets that have at least one series, in canonical order.
    pub fn feature_sets(&self) -> Vec<FeatureSet> {
        let present: BTreeSet<FeatureSet> = self.series.keys().map(|(_, f)| *f).collect();
        present.into_iter().collect()
    }

    /// Channel count of a feature set, if present.
    pub fn dim(&self, set: FeatureSet) -> Option<usize> {
        self.series.values().find(|s| s.feature_set == set).map(|s| s.dim())
    }

    /// `(participant index, label)` for every participant with a score for
    /// `task`; participants missing the score are left out of this task only.
    pub fn labeled(&self, task: &TaskSpec) -> Vec<(usize, bool)> {
        self.participants
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.outcome(&task.name).map(|s| (i, dichotomize(s, task))))
            .collect()
    }

    /// Rebuilds the cohort with a different series list (used by generators
    /// that modify features).
    pub fn with_series(&self, series: Vec<FeatureSeries>) -> Result<Cohort> {
        Cohort::new(self.participants.clone(), series, self.tasks.clone(), self.sensitive.clone())
    }

    pub fn into_parts(self) -> (Vec<ParticipantRecord>, Vec<FeatureSeries>, Vec<TaskSpec>, SensitiveSpec) {
        (self.participants, self.series.into_values().collect(), self.tasks, self.sensitive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(id: &str, age: f64, sex: Sex, yoe: u32, dx: Diagnosis) -> ParticipantRecord {
        ParticipantRecord { id: id.into(), age, sex, years_education: yoe, diagnosis: dx, scores: BTreeMap::new() }
    }

    #[test]
    fn dichotomize_boundaries() {
        let moca = TaskSpec::new("MoCA", 24.0, Operator::Le, "");
        assert!(dichotomize(24.0, &moca));
        let lsns = TaskSpec::new("LSNS6", 12.0, Operator::Le, "");
        assert!(!dichotomize(12.0001, &lsns));
        let na = TaskSpec::new("NegativeAffect", 44.10, Operator::Lt, "");
        assert!(!dichotomize(44.10, &na));
        assert!(dichotomize(44.09, &na));
        let cdr = TaskSpec::new("CDR", 0.5, Operator::EqHalf, "");
        assert!(dichotomize(0.5, &cdr));
        assert!(!dichotomize(0.0, &cdr));
    }

    #[test]
    fn eq_half_rejected_outside_cdr() {
        let t = TaskSpec::new("MoCA", 0.5, Operator::EqHalf, "");
        assert!(Cohort::new(vec![], vec![], vec![t], SensitiveSpec::default()).is_err());
    }

    #[test]
    fn sensitive_bins() {
        let spec = SensitiveSpec::default();
        let r = rec("a", 78.9, Sex::F, 16, Diagnosis::NC);
        assert_eq!(bin_sensitive(&r, SensitiveAttribute::YoeGroup, &spec), COLLEGE_GRADUATE);
        assert_eq!(bin_sensitive(&r, SensitiveAttribute::AgeGroup, &spec), AGE_LOW);
        assert_eq!(bin_sensitive(&r, SensitiveAttribute::Diagnosis, &spec), "NC");
        let r = rec("b", 79.0, Sex::M, 15, Diagnosis::MCI);
        assert_eq!(bin_sensitive(&r, SensitiveAttribute::YoeGroup, &spec), BELOW_COLLEGE);
        assert_eq!(bin_sensitive(&r, SensitiveAttribute::AgeGroup, &spec), AGE_HIGH);
        let r = rec("c", 79.0, Sex::M, 17, Diagnosis::MCI);
        assert_eq!(bin_sensitive(&r, SensitiveAttribute::YoeGroup, &spec), GRADUATE_PLUS);
    }

    #[test]
    fn demographics_sex_block() {
        let train = vec![rec("a", 80.0, Sex::F, 12, Diagnosis::NC), rec("b", 81.0, Sex::M, 16, Diagnosis::MCI)];
        let v = encode_demographics(&train, &train[0]).unwrap();
        // two-category sex column: values (1, 0), mean 0.5, std 0.5
        assert_eq!(&v[..2], &[1.0, -1.0]);
    }

    #[test]
    fn demographics_unseen_age_is_zero_block() {
        let train = vec![
            rec("a", 79.0, Sex::F, 12, Diagnosis::NC),
            rec("b", 81.0, Sex::M, 16, Diagnosis::MCI),
            rec("c", 85.0, Sex::F, 16, Diagnosis::MCI),
        ];
        let enc = DemographicEncoder::fit(&train).unwrap();
        let test = rec("t", 80.0, Sex::F, 12, Diagnosis::NC);
        let (ns, na, _) = enc.block_widths();
        let raw = enc.one_hot(&test);
        assert!(raw[ns..ns + na].iter().all(|v| *v == 0.0));
        let z = enc.encode(&test);
        for j in ns..ns + na {
            assert_eq!(z[j], (0.0 - enc.mean[j]) / enc.scale[j]);
        }
    }

    #[test]
    fn demographics_single_record_is_finite() {
        let train = vec![rec("a", 79.0, Sex::F, 12, Diagnosis::NC)];
        let v = encode_demographics(&train, &train[0]).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn missing_scores_drop_only_that_task() {
        let mut a = rec("a", 80.0, Sex::F, 12, Diagnosis::NC);
        a.scores.insert("MoCA".into(), 22.0);
        let mut b = rec("b", 80.0, Sex::F, 12, Diagnosis::MCI);
        b.scores.insert("MoCA".into(), 27.0);
        b.scores.insert("LSNS6".into(), 10.0);
        let c = Cohort::new(vec![a, b], vec![], TaskSpec::defaults(), SensitiveSpec::default()).unwrap();
        let moca = c.task("MoCA").unwrap().clone();
        let lsns = c.task("LSNS6").unwrap().clone();
        assert_eq!(c.labeled(&moca), vec![(0, true), (1, false)]);
        assert_eq!(c.labeled(&lsns), vec![(1, true)]);
        let dx = c.task(NORMAL_COGNITION).unwrap().clone();
        assert_eq!(c.labeled(&dx), vec![(0, false), (1, true)]);
    }

    #[test]
    fn median_helper() {
        let mut rs = Vec::new();
        for (i, s) in [3.0, 1.0, 2.0, 10.0].iter().enumerate() {
            let mut r = rec(&format!("{i}"), 80.0, Sex::F, 12, Diagnosis::NC);
            r.scores.insert("X".into(), *s);
            rs.push(r);
        }
        assert_eq!(median_cutoff(&rs, "X"), Some(2.5));
        assert_eq!(median_cutoff(&rs[..3], "X"), Some(2.0));
        assert_eq!(median_cutoff(&rs, "Y"), None);
    }

    #[test]
    fn unknown_feature_set_lists_valid_names() {
        let err = "Video".parse::<FeatureSet>().unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("EmotionAUs") && msg.contains("LLaMA"));
    }
}
