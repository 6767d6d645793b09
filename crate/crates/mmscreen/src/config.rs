//! Run and synthesis configuration files (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mmscreen_core::attribution::DEFAULT_PERMUTATIONS;
use mmscreen_core::cohort::{FeatureSet, SensitiveAttribute};
use mmscreen_core::evaluation::{EvalConfig, SEED_BASE};
use mmscreen_core::fairness::EoConfig;
use mmscreen_core::fusion::{FusionRule, Modality, Pipeline, TiePolicy};
use mmscreen_core::learners::LearnerParams;
use mmscreen_core::synth::SynthConfig;
use mmscreen_core::temporal::HmmConfig;
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionConfig {
    pub enabled: bool,
    pub permutations: usize,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        AttributionConfig { enabled: true, permutations: DEFAULT_PERMUTATIONS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairnessConfig {
    pub attributes: Vec<String>,
    pub mitigation: bool,
    pub tolerance: f64,
    pub max_combinations: usize,
}

impl Default for FairnessConfig {
    fn default() -> Self {
        let eo = EoConfig::default();
        FairnessConfig {
            attributes: SensitiveAttribute::ALL.iter().map(|a| a.name().to_string()).collect(),
            mitigation: true,
            tolerance: eo.tolerance,
            max_combinations: eo.max_combinations,
        }
    }
}

/// Everything that determines a run's outputs. Thread count is deliberately
/// absent: it never changes results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub out: PathBuf,
    /// Empty means every task defined by the dataset.
    pub tasks: Vec<String>,
    pub pipelines: Vec<String>,
    pub rules: Vec<String>,
    /// Feature-set names; empty means all available.
    pub members: Vec<String>,
    pub runs: usize,
    pub seed_base: u64,
    pub learners: LearnerParams,
    pub hmm: HmmConfig,
    pub attribution: AttributionConfig,
    pub fairness: FairnessConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: PathBuf::from("data/demo"),
            out: PathBuf::from("results"),
            tasks: Vec::new(),
            pipelines: Pipeline::ALL.iter().map(|p| p.to_string()).collect(),
            rules: FusionRule::ALL.iter().map(|r| r.to_string()).collect(),
            members: Vec::new(),
            runs: 100,
            seed_base: SEED_BASE,
            learners: LearnerParams::default(),
            hmm: HmmConfig::default(),
            attribution: AttributionConfig::default(),
            fairness: FairnessConfig::default(),
        }
    }
}

fn parse_all<T: FromStr<Err = mmscreen_core::Error>>(what: &str, names: &[String]) -> Result<Vec<T>, AppError> {
    names
        .iter()
        .map(|n| n.parse::<T>().map_err(|e| AppError::validation(format!("{what}: {e}"))))
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::validation(format!("reading {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| AppError::validation(format!("{}: {e}", path.display())))
    }

    pub fn pipelines(&self) -> Result<Vec<Pipeline>, AppError> {
        parse_all("pipelines", &self.pipelines)
    }

    pub fn rules(&self) -> Result<Vec<FusionRule>, AppError> {
        parse_all("rules", &self.rules)
    }

    pub fn attributes(&self) -> Result<Vec<SensitiveAttribute>, AppError> {
        parse_all("fairness.attributes", &self.fairness.attributes)
    }

    pub fn eo(&self) -> EoConfig {
        EoConfig { tolerance: self.fairness.tolerance, max_combinations: self.fairness.max_combinations }
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.runs == 0 {
            return Err(AppError::validation("runs must be at least 1"));
        }
        if self.attribution.permutations == 0 {
            return Err(AppError::validation("attribution.permutations must be at least 1"));
        }
        if self.pipelines()?.is_empty() || self.rules()?.is_empty() {
            return Err(AppError::validation("at least one pipeline and one fusion rule are required"));
        }
        if !(0.0..=1.0).contains(&self.fairness.tolerance) {
            return Err(AppError::validation("fairness.tolerance must lie in [0, 1]"));
        }
        parse_all::<Modality>("members", &self.members)?;
        self.attributes()?;
        Ok(())
    }

    /// Harness configuration for one pipeline.
    pub fn eval(&self, pipeline: Pipeline) -> Result<EvalConfig, AppError> {
        Ok(EvalConfig {
            pipeline,
            members: parse_all("members", &self.members)?,
            rules: self.rules()?,
            tie: TiePolicy::Positive,
            learners: self.learners.clone(),
            hmm: self.hmm.clone(),
            runs: self.runs,
            seed_base: self.seed_base,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasEntry {
    pub attribute: String,
    pub group: String,
    pub shift: f64,
    pub sets: Vec<String>,
}

/// Synthetic cohort recipe: a preset plus overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthFile {
    /// `small` (N=39), `large` (N=200) or `null` (no signal).
    pub preset: String,
    pub n: Option<usize>,
    pub seed: u64,
    pub target: Option<String>,
    pub positive_rate: Option<f64>,
    /// Effect size per feature-set name.
    pub effects: BTreeMap<String, f64>,
    /// Channel count per feature-set name.
    pub dims: BTreeMap<String, usize>,
    /// Feature sets to leave out entirely.
    pub drop: Vec<String>,
    pub bias: Option<BiasEntry>,
}

impl Default for SynthFile {
    fn default() -> Self {
        SynthFile {
            preset: "small".into(),
            n: None,
            seed: SEED_BASE,
            target: None,
            positive_rate: None,
            effects: BTreeMap::new(),
            dims: BTreeMap::new(),
            drop: Vec::new(),
            bias: None,
        }
    }
}

fn feature_set(name: &str) -> Result<FeatureSet, AppError> {
    name.parse().map_err(|e: mmscreen_core::Error| AppError::validation(e.to_string()))
}

impl SynthFile {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::validation(format!("reading {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| AppError::validation(format!("{}: {e}", path.display())))
    }

    pub fn build(&self) -> Result<SynthConfig, AppError> {
        let mut c = match self.preset.as_str() {
            "small" => SynthConfig::small(self.seed),
            "large" => SynthConfig::large(self.seed),
            "null" => SynthConfig::null(39, self.seed),
            other => {
                return Err(AppError::validation(format!("unknown preset '{other}'; valid presets: small, large, null")))
            }
        };
        if let Some(n) = self.n {
            c.n = n;
        }
        if let Some(t) = &self.target {
            c.target = t.clone();
        }
        if let Some(r) = self.positive_rate {
            c.positive_rate = r;
        }
        for name in &self.drop {
            let set = feature_set(name)?;
            c.sets.retain(|s| s.set != set);
        }
        for (name, effect) in &self.effects {
            let set = feature_set(name)?;
            let s = c.sets.iter_mut().find(|s| s.set == set);
            s.ok_or_else(|| AppError::validation(format!("effect for absent feature set {name}")))?.effect = *effect;
        }
        for (name, dim) in &self.dims {
            let set = feature_set(name)?;
            let s = c.sets.iter_mut().find(|s| s.set == set);
            s.ok_or_else(|| AppError::validation(format!("dim for absent feature set {name}")))?.dim = *dim;
        }
        c.validate().map_err(|e| AppError::validation(e.to_string()))?;
        Ok(c)
    }

    pub fn bias(&self) -> Result<Option<(SensitiveAttribute, String, f64, Vec<FeatureSet>)>, AppError> {
        let Some(b) = &self.bias else { return Ok(None) };
        let attr = b.attribute.parse().map_err(|e: mmscreen_core::Error| AppError::validation(e.to_string()))?;
        let sets = b.sets.iter().map(|s| feature_set(s)).collect::<Result<_, _>>()?;
        Ok(Some((attr, b.group.clone(), b.shift, sets)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_run_config() {
        let c: RunConfig = toml::from_str("runs = 3\n[learners.gbdt]\nn_trees = 10\n").unwrap();
        assert_eq!(c.runs, 3);
        assert_eq!(c.learners.gbdt.n_trees, 10);
        assert_eq!(c.learners.gbdt.max_depth, 3);
        assert_eq!(c.pipelines.len(), 3);
        c.validate().unwrap();
    }

    #[test]
    fn bad_names_are_validation_errors() {
        let c = RunConfig { rules: vec!["Plurality".into()], ..Default::default() };
        assert_eq!(c.validate().unwrap_err().exit_code(), 1);
        let s = SynthFile { effects: [("Thermal".to_string(), 1.0)].into(), ..Default::default() };
        assert!(s.build().unwrap_err().to_string().contains("valid names"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("run = 3\n").is_err());
    }
}
