//! Seeded synthetic cohorts with planted class signal and group bias.
//!
//! Every participant draws from its own ChaCha stream keyed by the cohort
//! seed and its index, so removing one participant leaves the others intact.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cohort::{
    bin_sensitive, Cohort, Diagnosis, FeatureSeries, FeatureSet, Operator, ParticipantRecord, SensitiveAttribute,
    SensitiveSpec, Sex, TaskSpec, NORMAL_COGNITION,
};
use crate::error::{invalid, Result};
use crate::matrix::Matrix;

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// A diagonal-Gaussian HMM used to sample temporal feature sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianHmm {
    /// `states x dim`
    pub means: Matrix,
    /// Per-state, per-channel noise standard deviations.
    pub sds: Matrix,
    pub transition: Matrix,
    pub initial: Vec<f64>,
}

impl GaussianHmm {
    /// State `k` sits at `spread * ((k + d) mod K)` on channel `d`, so every
    /// pair of states differs by at least `spread` on each channel. Sticky
    /// transitions (0.8 self, rest uniform), uniform start.
    pub fn well_separated(states: usize, dim: usize, spread: f64, noise_sd: f64) -> Self {
        let mut means = Matrix::zeros(states, dim);
        for k in 0..states {
            for d in 0..dim {
                means.set(k, d, spread * ((k + d) % states) as f64);
            }
        }
        Self::with_means(means, noise_sd, 0.8)
    }

    /// Random state means `N(0, spread^2)` drawn from `rng`.
    pub fn random<R: Rng + ?Sized>(states: usize, dim: usize, spread: f64, noise_sd: f64, stay: f64, rng: &mut R) -> Self {
        let means = Matrix::from_vec(states, dim, (0..states * dim).map(|_| spread * gauss(rng)).collect())
            .expect("shape matches");
        Self::with_means(means, noise_sd, stay)
    }

    fn with_means(means: Matrix, noise_sd: f64, stay: f64) -> Self {
        let k = means.rows();
        let mut transition = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let p = if k == 1 {
                    1.0
                } else if i == j {
                    stay
                } else {
                    (1.0 - stay) / (k - 1) as f64
                };
                transition.set(i, j, p);
            }
        }
        let sds = Matrix::from_vec(k, means.cols(), vec![noise_sd; k * means.cols()]).expect("shape matches");
        GaussianHmm { means, sds, transition, initial: vec![1.0 / k as f64; k] }
    }

    pub fn states(&self) -> usize {
        self.means.rows()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    /// Copy with every state mean moved by `shift` on every channel.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..out.states() {
            for v in out.means.row_mut(i) {
                *v += shift;
            }
        }
        out
    }

    fn draw_state<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        probs.len() - 1
    }

    /// Samples a `t x dim` sequence and its hidden state path.
    pub fn sample_with_path<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> (Matrix, Vec<usize>) {
        let d = self.dim();
        let mut x = Matrix::zeros(t, d);
        let mut path = Vec::with_capacity(t);
        let mut s = Self::draw_state(&self.initial, rng);
        for step in 0..t {
            if step > 0 {
                s = Self::draw_state(self.transition.row(s), rng);
            }
            path.push(s);
            let row = x.row_mut(step);
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.means.get(s, j) + self.sds.get(s, j) * gauss(rng);
            }
        }
        (x, path)
    }

    pub fn sample<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Matrix {
        self.sample_with_path(t, rng).0
    }
}

/// Generation settings for one raw feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetConfig {
    pub set: FeatureSet,
    pub dim: usize,
    pub t_min: usize,
    pub t_max: usize,
    /// Shift of every state mean (or static value) for positive participants;
    /// zero makes the set uninformative.
    pub effect: f64,
}

impl SetConfig {
    pub fn new(set: FeatureSet, dim: usize, t_min: usize, t_max: usize, effect: f64) -> Self {
        SetConfig { set, dim, t_min, t_max, effect }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    /// Outcome whose dichotomized label drives the planted signal.
    pub target: String,
    pub positive_rate: f64,
    pub sets: Vec<SetConfig>,
    pub tasks: Vec<TaskSpec>,
    pub sensitive: SensitiveSpec,
    /// Spread of the random HMM state means.
    pub state_spread: f64,
    pub noise_sd: f64,
    /// Self-transition probability of the generating HMMs.
    pub stay: f64,
}

/// Target cohort marginals: mean and standard deviation per outcome.
const OUTCOME_MARGINALS: [(&str, f64, f64, f64, f64); 7] = [
    // name, mean, sd, min, max
    ("MoCA", 24.54, 3.61, 0.0, 30.0),
    ("LSNS6", 14.13, 5.86, 0.0, 30.0),
    ("Neuroticism", 16.44, 8.41, 0.0, 48.0),
    ("NegativeAffect", 48.57, 10.93, 20.0, 80.0),
    ("SocialSatisfaction", 49.02, 11.77, 20.0, 80.0),
    ("PsychologicalWellBeing", 50.87, 9.99, 20.0, 80.0),
    ("CDR", 0.0, 0.0, 0.0, 0.5),
];
const AGE_MEAN: f64 = 80.69;
const AGE_SD: f64 = 4.6;
const YOE_MEAN: f64 = 15.44;
const YOE_SD: f64 = 2.34;
const FEMALE_RATE: f64 = 29.0 / 39.0;
const MCI_RATE: f64 = 22.0 / 39.0;
const CDR_HALF_RATE: f64 = 19.0 / 39.0;

impl SynthConfig {
    /// All eight feature sets at reduced dimensions, no planted signal.
    pub fn null(n: usize, seed: u64) -> Self {
        SynthConfig {
            n,
            seed,
            target: "CDR".into(),
            positive_rate: CDR_HALF_RATE,
            sets: vec![
                SetConfig::new(FeatureSet::EmotionAus, 12, 30, 60, 0.0),
                SetConfig::new(FeatureSet::Dinov2, 64, 30, 60, 0.0),
                SetConfig::new(FeatureSet::Rppg, 1, 40, 80, 0.0),
                SetConfig::new(FeatureSet::Acoustic, 8, 30, 60, 0.0),
                SetConfig::new(FeatureSet::Wavlm, 64, 30, 60, 0.0),
                SetConfig::new(FeatureSet::RobertaSentiment, 3, 20, 40, 0.0),
                SetConfig::new(FeatureSet::Llama, 128, 1, 1, 0.0),
            ],
            tasks: TaskSpec::defaults(),
            sensitive: SensitiveSpec::default(),
            state_spread: 2.0,
            noise_sd: 1.0,
            stay: 0.9,
        }
    }

    /// 39 participants matching the reference marginals, with a moderate
    /// audio signal for CDR.
    pub fn small(seed: u64) -> Self {
        let mut c = Self::null(39, seed);
        c.set_effect(FeatureSet::Acoustic, 1.0);
        c.set_effect(FeatureSet::Wavlm, 1.0);
        c
    }

    /// 200 participants, same layout as [`SynthConfig::small`].
    pub fn large(seed: u64) -> Self {
        let mut c = Self::small(seed);
        c.n = 200;
        c
    }

    pub fn set_effect(&mut self, set: FeatureSet, effect: f64) {
        if let Some(s) = self.sets.iter_mut().find(|s| s.set == set) {
            s.effect = effect;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(invalid(format!("synthetic cohort needs at least 10 participants, got {}", self.n)));
        }
        if !(0.0..=1.0).contains(&self.positive_rate) {
            return Err(invalid("positive_rate must lie in [0, 1]"));
        }
        let target = self.tasks.iter().find(|t| t.name == self.target);
        if target.is_none() {
            return Err(invalid(format!("target outcome '{}' has no task definition", self.target)));
        }
        for s in &self.sets {
            if s.effect < 0.0 || !s.effect.is_finite() {
                return Err(invalid(format!("{}: effect size must be a finite non-negative number", s.set)));
            }
            if s.dim == 0 {
                return Err(invalid(format!("{}: dimension must be positive", s.set)));
            }
            if s.set == FeatureSet::Demographics {
                return Err(invalid("demographics come from the participants table, not a generated series"));
            }
            let range_ok = if s.set.is_static() {
                s.t_min == 1 && s.t_max == 1
            } else {
                20 <= s.t_min && s.t_min <= s.t_max && s.t_max <= 2000
            };
            if !range_ok {
                return Err(invalid(format!("{}: length range {}..={} is not allowed", s.set, s.t_min, s.t_max)));
            }
        }
        Ok(())
    }
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A score on the requested side of a task's cutoff.
fn score_for<R: Rng + ?Sized>(task: &TaskSpec, positive: bool, sd: f64, rng: &mut R) -> f64 {
    match task.operator {
        Operator::EqHalf => {
            if positive {
                0.5
            } else {
                0.0
            }
        }
        Operator::Le | Operator::Lt => {
            let off = (gauss(rng).abs() + 0.05) * sd.max(0.1);
            let v = if positive { task.cutoff - off } else { task.cutoff + off };
            round_to(v, 100.0)
        }
    }
}

fn round_to(v: f64, scale: f64) -> f64 {
    libm::round(v * scale) / scale
}

/// Draws a cohort. Sets are sampled from per-set random HMMs; positives of an
/// informative set have every state mean shifted by its effect size.
pub fn generate(config: &SynthConfig) -> Result<Cohort> {
    config.validate()?;
    let target = config.tasks.iter().find(|t| t.name == config.target).expect("validated").clone();
    let mut structure = substream(config.seed, u64::MAX);
    let models: Vec<(GaussianHmm, GaussianHmm)> = config
        .sets
        .iter()
        .map(|s| {
            let base = GaussianHmm::random(4, s.dim, config.state_spread, config.noise_sd, config.stay, &mut structure);
            let pos = base.shifted(s.effect);
            (base, pos)
        })
        .collect();

    let mut participants = Vec::with_capacity(config.n);
    let mut series = Vec::new();
    for i in 0..config.n {
        let mut rng = substream(config.seed, i as u64);
        let positive = rng.random::<f64>() < config.positive_rate;
        let id = format!("P{i:03}");
        let (record, _) = draw_record(&id, &target, positive, &mut rng);
        for (s, (neg_hmm, pos_hmm)) in config.sets.iter().zip(&models) {
            let hmm = if positive { pos_hmm } else { neg_hmm };
            let data = if s.set.is_static() {
                let mean = hmm.means.row(0);
                let v: Vec<f64> = mean.iter().map(|m| m + config.noise_sd * gauss(&mut rng)).collect();
                Matrix::from_vec(1, s.dim, v)?
            } else {
                let t = rng.random_range(s.t_min..=s.t_max);
                hmm.sample(t, &mut rng)
            };
            let mut fs = FeatureSeries::new(id.clone(), s.set, data);
            fs.channels = (0..s.dim).map(|j| format!("{}_{j}", s.set.name())).collect();
            series.push(fs);
        }
        participants.push(record);
    }
    Cohort::new(participants, series, config.tasks.clone(), config.sensitive.clone())
}

fn draw_record<R: Rng + ?Sized>(id: &str, target: &TaskSpec, positive: bool, rng: &mut R) -> (ParticipantRecord, bool) {
    let age = libm::round(AGE_MEAN + AGE_SD * gauss(rng)).clamp(65.0, 100.0);
    let sex = if rng.random::<f64>() < FEMALE_RATE { Sex::F } else { Sex::M };
    let years_education = libm::round(YOE_MEAN + YOE_SD * gauss(rng)).clamp(8.0, 24.0) as u32;
    let mci = if target.name == NORMAL_COGNITION { positive } else { rng.random::<f64>() < MCI_RATE };
    let diagnosis = if mci { Diagnosis::MCI } else { Diagnosis::NC };
    let mut scores = BTreeMap::new();
    for (name, mean, sd, lo, hi) in OUTCOME_MARGINALS {
        let v = if name == target.name {
            score_for(target, positive, sd, rng)
        } else if name == "CDR" {
            if rng.random::<f64>() < CDR_HALF_RATE {
                0.5
            } else {
                0.0
            }
        } else {
            libm::round(mean + sd * gauss(rng)).clamp(lo, hi)
        };
        scores.insert(name.to_string(), v);
    }
    let record = ParticipantRecord { id: id.to_string(), age, sex, years_education, diagnosis, scores };
    (record, positive)
}

/// Adds `shift` to every value of the given feature sets for participants in
/// `group` of `attribute`. A zero shift returns the cohort unchanged.
pub fn plant_bias(
    cohort: &Cohort,
    attribute: SensitiveAttribute,
    group: &str,
    shift: f64,
    sets: &[FeatureSet],
) -> Result<Cohort> {
    let spec = cohort.sensitive();
    let members: Vec<&str> = cohort
        .participants()
        .iter()
        .filter(|p| bin_sensitive(p, attribute, spec) == group)
        .map(|p| p.id.as_str())
        .collect();
    if members.is_empty() {
        return Err(invalid(format!("no participant falls in group '{group}' of {}", attribute.name())));
    }
    if shift == 0.0 {
        return Ok(cohort.clone());
    }
    let series = cohort
        .all_series()
        .map(|s| {
            let mut s = s.clone();
            if sets.contains(&s.feature_set) && members.contains(&s.participant_id.as_str()) {
                for i in 0..s.data.rows() {
                    s.data.row_mut(i).iter_mut().for_each(|v| *v += shift);
                }
            }
            s
        })
        .collect();
    cohort.with_series(series)
}

/// Shuffles one outcome's scores across the participants that have it,
/// breaking any link between features and labels.
pub fn permute_outcome(cohort: &Cohort, outcome: &str, seed: u64) -> Result<Cohort> {
    let (mut participants, series, tasks, sensitive) = cohort.clone().into_parts();
    let holders: Vec<usize> = (0..participants.len()).filter(|&i| participants[i].scores.contains_key(outcome)).collect();
    if holders.is_empty() {
        return Err(invalid(format!("no participant has a score for '{outcome}'")));
    }
    let mut values: Vec<f64> = holders.iter().map(|&i| participants[i].scores[outcome]).collect();
    values.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for (&i, v) in holders.iter().zip(values) {
        participants[i].scores.insert(outcome.to_string(), v);
    }
    Cohort::new(participants, series, tasks, sensitive)
}

/// Fused scores, labels and groups for threshold experiments: score =
/// clamp(0.35 + 0.3 y + shift(group) + N(0, sd^2)) with balanced labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGroups {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub groups: Vec<String>,
}

pub fn scored_groups(per_group: usize, shifts: &[(&str, f64)], sd: f64, seed: u64) -> ScoredGroups {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).expect("finite standard deviation");
    let mut out = ScoredGroups { scores: Vec::new(), labels: Vec::new(), groups: Vec::new() };
    for &(g, shift) in shifts {
        for _ in 0..per_group {
            let y = rng.random::<bool>();
            let s = 0.35 + if y { 0.3 } else { 0.0 } + shift + noise.sample(&mut rng);
            out.scores.push(s.clamp(0.0, 1.0));
            out.labels.push(y);
            out.groups.push(g.to_string());
        }
    }
    out
}
