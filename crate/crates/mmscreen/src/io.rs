//! On-disk cohort layout:
//!
//! ```text
//! <root>/participants.csv              id,age,sex,years_education,diagnosis,<outcome>...
//! <root>/tasks.toml                    task cutoffs, sensitive thresholds, sample-rate hints
//! <root>/features/<id>/<set>.csv       header of channel names, one row per time step
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mmscreen_core::cohort::{
    Cohort, Diagnosis, FeatureSeries, FeatureSet, Operator, ParticipantRecord, SensitiveSpec, Sex, TaskSpec,
};
use mmscreen_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::output::{atomic_dir, atomic_write};

pub const PARTICIPANTS_FILE: &str = "participants.csv";
pub const TASKS_FILE: &str = "tasks.toml";
pub const FEATURES_DIR: &str = "features";

const FIXED_COLUMNS: [&str; 5] = ["id", "age", "sex", "years_education", "diagnosis"];

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("missing participants table: {0}")]
    MissingParticipants(PathBuf),
    #[error("{file}: line {line}, column {column}: {message}")]
    Cell { file: PathBuf, line: u64, column: String, message: String },
    #[error("{file}: {message}")]
    File { file: PathBuf, message: String },
    #[error("{0}")]
    Cohort(#[from] mmscreen_core::Error),
}

impl LoadError {
    fn file(file: &Path, message: impl ToString) -> Self {
        LoadError::File { file: file.to_path_buf(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorName {
    #[serde(rename = "LE")]
    Le,
    #[serde(rename = "LT")]
    Lt,
    #[serde(rename = "EQ_HALF")]
    EqHalf,
}

impl From<Operator> for OperatorName {
    fn from(o: Operator) -> Self {
        match o {
            Operator::Le => OperatorName::Le,
            Operator::Lt => OperatorName::Lt,
            Operator::EqHalf => OperatorName::EqHalf,
        }
    }
}

impl From<OperatorName> for Operator {
    fn from(o: OperatorName) -> Self {
        match o {
            OperatorName::Le => Operator::Le,
            OperatorName::Lt => Operator::Lt,
            OperatorName::EqHalf => Operator::EqHalf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub name: String,
    pub cutoff: f64,
    pub operator: OperatorName,
    #[serde(default)]
    pub positive_means: String,
}

/// Contents of `tasks.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TasksFile {
    #[serde(default, rename = "task")]
    pub tasks: Vec<TaskEntry>,
    #[serde(default)]
    pub sensitive: SensitiveSpec,
    /// Sample rate in Hz per feature-set name, applied to every series of that set.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sample_rate_hints: BTreeMap<String, f64>,
}

impl Default for TasksFile {
    fn default() -> Self {
        TasksFile::from_specs(&TaskSpec::defaults(), &SensitiveSpec::default(), BTreeMap::new())
    }
}

impl TasksFile {
    pub fn from_specs(tasks: &[TaskSpec], sensitive: &SensitiveSpec, sample_rate_hints: BTreeMap<String, f64>) -> Self {
        TasksFile {
            tasks: tasks
                .iter()
                .map(|t| TaskEntry {
                    name: t.name.clone(),
                    cutoff: t.cutoff,
                    operator: t.operator.into(),
                    positive_means: t.positive_means.clone(),
                })
                .collect(),
            sensitive: sensitive.clone(),
            sample_rate_hints,
        }
    }

    pub fn specs(&self) -> Vec<TaskSpec> {
        self.tasks
            .iter()
            .map(|t| TaskSpec {
                name: t.name.clone(),
                cutoff: t.cutoff,
                operator: t.operator.into(),
                positive_means: t.positive_means.clone(),
            })
            .collect()
    }
}

fn parse_f64(file: &Path, line: u64, column: &str, cell: &str) -> Result<f64, LoadError> {
    let v: f64 = cell.trim().parse().map_err(|_| LoadError::Cell {
        file: file.to_path_buf(),
        line,
        column: column.to_string(),
        message: format!("malformed number '{cell}'"),
    })?;
    if !v.is_finite() {
        return Err(LoadError::Cell {
            file: file.to_path_buf(),
            line,
            column: column.to_string(),
            message: format!("non-finite value '{cell}'"),
        });
    }
    Ok(v)
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>, LoadError> {
    csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| LoadError::file(path, e))
}

fn line_of(record: &csv::StringRecord, fallback: u64) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(fallback)
}

fn read_participants(path: &Path) -> Result<Vec<ParticipantRecord>, LoadError> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr.headers().map_err(|e| LoadError::file(path, e))?.iter().map(str::to_string).collect();
    if header.len() < FIXED_COLUMNS.len() || header[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(LoadError::file(path, format!("header must start with {}", FIXED_COLUMNS.join(","))));
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| LoadError::file(path, e))?;
        let line = line_of(&rec, k as u64 + 2);
        let cell_err = |column: &str, message: String| LoadError::Cell {
            file: path.to_path_buf(),
            line,
            column: column.to_string(),
            message,
        };
        let id = rec[0].trim().to_string();
        if id.is_empty() {
            return Err(cell_err("id", "empty participant id".into()));
        }
        let age = parse_f64(path, line, "age", &rec[1])?;
        let sex: Sex = rec[2].parse().map_err(|e: mmscreen_core::Error| cell_err("sex", e.to_string()))?;
        let yoe = parse_f64(path, line, "years_education", &rec[3])?;
        if yoe < 0.0 || yoe.fract() != 0.0 || yoe > u32::MAX as f64 {
            return Err(cell_err("years_education", format!("expected a non-negative integer, got '{}'", &rec[3])));
        }
        let diagnosis: Diagnosis =
            rec[4].parse().map_err(|e: mmscreen_core::Error| cell_err("diagnosis", e.to_string()))?;
        let mut scores = BTreeMap::new();
        for (name, cell) in header.iter().zip(rec.iter()).skip(FIXED_COLUMNS.len()) {
            if !cell.trim().is_empty() {
                scores.insert(name.clone(), parse_f64(path, line, name, cell)?);
            }
        }
        out.push(ParticipantRecord { id, age, sex, years_education: yoe as u32, diagnosis, scores });
    }
    Ok(out)
}

fn read_series(path: &Path, participant: &str, set: FeatureSet, hint: Option<f64>) -> Result<FeatureSeries, LoadError> {
    let mut rdr = reader(path)?;
    let channels: Vec<String> = rdr.headers().map_err(|e| LoadError::file(path, e))?.iter().map(str::to_string).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| LoadError::file(path, e))?;
        let line = line_of(&rec, k as u64 + 2);
        for (name, cell) in channels.iter().zip(rec.iter()) {
            values.push(parse_f64(path, line, name, cell)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(LoadError::file(path, "series has no rows"));
    }
    let data = Matrix::from_vec(rows, channels.len(), values).map_err(LoadError::Cohort)?;
    Ok(FeatureSeries { participant_id: participant.to_string(), feature_set: set, channels, data, sample_rate_hint: hint })
}

pub fn read_tasks(root: &Path) -> Result<TasksFile, LoadError> {
    let path = root.join(TASKS_FILE);
    if !path.exists() {
        return Ok(TasksFile::default());
    }
    let text = fs::read_to_string(&path).map_err(|e| LoadError::file(&path, e))?;
    toml::from_str(&text).map_err(|e| LoadError::file(&path, e))
}

/// Reads and validates a cohort directory.
pub fn load_cohort(root: &Path) -> Result<Cohort, LoadError> {
    let participants_path = root.join(PARTICIPANTS_FILE);
    if !participants_path.is_file() {
        return Err(LoadError::MissingParticipants(participants_path));
    }
    let participants = read_participants(&participants_path)?;
    let tasks = read_tasks(root)?;
    let mut hints = BTreeMap::new();
    for (name, hz) in &tasks.sample_rate_hints {
        let set: FeatureSet = name.parse().map_err(|e: mmscreen_core::Error| LoadError::file(&root.join(TASKS_FILE), e))?;
        hints.insert(set, *hz);
    }

    let mut series = Vec::new();
    let features = root.join(FEATURES_DIR);
    if features.is_dir() {
        for dir in sorted_entries(&features)? {
            if !dir.is_dir() {
                continue;
            }
            let participant = file_name(&dir);
            for file in sorted_entries(&dir)? {
                if file.extension().and_then(|e| e.to_str()) != Some("csv") {
                    continue;
                }
                let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                let set: FeatureSet = stem.parse().map_err(|e: mmscreen_core::Error| LoadError::file(&file, e))?;
                series.push(read_series(&file, &participant, set, hints.get(&set).copied())?);
            }
        }
    }
    Ok(Cohort::new(participants, series, tasks.specs(), tasks.sensitive.clone())?)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, LoadError> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| LoadError::file(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| LoadError::file(dir, e))?;
    v.sort();
    Ok(v)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner()?)
}

/// Writes `cohort` to `root` in the layout read by [`load_cohort`]. Floats use
/// the shortest representation that parses back to the same bits.
pub fn write_cohort(cohort: &Cohort, root: &Path) -> anyhow::Result<()> {
    let outcomes: Vec<String> = {
        let mut v: Vec<String> = cohort.participants().iter().flat_map(|p| p.scores.keys().cloned()).collect();
        v.sort();
        v.dedup();
        v
    };
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(outcomes.iter().cloned());
    let rows = cohort.participants().iter().map(|p| {
        let mut r = vec![p.id.clone(), p.age.to_string(), p.sex.to_string(), p.years_education.to_string(), p.diagnosis.to_string()];
        r.extend(outcomes.iter().map(|o| p.scores.get(o).map(|v| v.to_string()).unwrap_or_default()));
        r
    });
    let participants = csv_bytes(&header, rows)?;

    let mut hints = BTreeMap::new();
    for s in cohort.all_series() {
        if let Some(hz) = s.sample_rate_hint {
            hints.insert(s.feature_set.name().to_string(), hz);
        }
    }
    let tasks = toml::to_string(&TasksFile::from_specs(cohort.tasks(), cohort.sensitive(), hints))?;

    atomic_dir(root, |tmp| {
        fs::write(tmp.join(PARTICIPANTS_FILE), &participants)?;
        fs::write(tmp.join(TASKS_FILE), tasks.as_bytes())?;
        for s in cohort.all_series() {
            let dir = tmp.join(FEATURES_DIR).join(&s.participant_id);
            fs::create_dir_all(&dir)?;
            let rows = s.data.iter_rows().map(|r| r.iter().map(|v| v.to_string()).collect());
            fs::write(dir.join(format!("{}.csv", s.feature_set.name())), csv_bytes(&s.channels, rows)?)?;
        }
        Ok(())
    })
}

/// Writes a fitted HMM as JSON for inspection.
pub fn write_hmm_json(model: &mmscreen_core::temporal::HmmModel, path: &Path) -> anyhow::Result<()> {
    atomic_write(path, serde_json::to_string_pretty(model)?.as_bytes())
}
