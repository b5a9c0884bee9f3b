//! Samples, datasets and their line-delimited JSON persistence.

mod combine;
mod preprocess;
mod stats;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use combine::{combine_augment, combine_replace};
pub use preprocess::{preprocess, PreprocessReport, PreprocessRules};
pub use stats::{compute_stats, count_reasoning_steps, StatsReport, StepHeuristic};

pub const SCHEMA_VERSION: u32 = 1;

/// Open key-value metadata attached to a sample.
pub type Meta = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Seed,
    Synthesized,
}

/// One image-question-answer triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub id: String,
    pub image_ref: String,
    pub question: String,
    pub answer: String,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: Meta,
}

impl Sample {
    pub fn seed(id: impl Into<String>, image_ref: impl Into<String>, question: impl Into<String>, answer: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            image_ref: image_ref.into(),
            question: question.into(),
            answer: answer.into(),
            origin: Origin::Seed,
            parent_id: None,
            meta: Meta::new(),
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |reason: &str| DatasetError::InvalidSample { id: self.id.clone(), reason: reason.to_string() };
        if self.id.is_empty() {
            return Err(bad("empty id"));
        }
        if self.question.trim().is_empty() {
            return Err(bad("empty question"));
        }
        if self.answer.trim().is_empty() {
            return Err(bad("empty answer"));
        }
        match (self.origin, &self.parent_id) {
            (Origin::Seed, Some(_)) => Err(bad("seed sample carries a parent_id")),
            (Origin::Synthesized, None) => Err(bad("synthesized sample without parent_id")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("sample `{id}`: {reason}")]
    InvalidSample { id: String, reason: String },
    #[error("synthesized samples reference unknown parents: {}", .0.join(", "))]
    DanglingParent(Vec<String>),
    #[error("several synthesized samples share a parent: {}", .0.join(", "))]
    AmbiguousReplacement(Vec<String>),
    #[error("cannot convert multiple-choice answers for: {}", .0.join(", "))]
    McqConversion(Vec<String>),
    #[error("no rollout result for: {}", .0.join(", "))]
    MissingRollouts(Vec<String>),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

/// Ordered collection of samples with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub schema_version: u32,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(DatasetError::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self { name: name.into(), schema_version: SCHEMA_VERSION, samples })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self { name: name.into(), schema_version: SCHEMA_VERSION, samples: Vec::new() }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    /// Parses line-delimited records. Blank lines are skipped; line numbers
    /// in errors are 1-based.
    pub fn from_reader(name: impl Into<String>, reader: impl BufRead) -> Result<Self, DatasetError> {
        let mut samples = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| DatasetError::Parse { line: line_no, message: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let sample: Sample = serde_json::from_str(&line)
                .map_err(|e| DatasetError::Parse { line: line_no, message: e.to_string() })?;
            sample.validate().map_err(|e| DatasetError::Parse { line: line_no, message: e.to_string() })?;
            samples.push(sample);
        }
        Self::new(name, samples)
    }

    pub fn write_to(&self, mut writer: impl Write) -> io::Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut writer, s)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Loads a dataset file; the dataset is named after the file stem.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::from_reader(name, BufReader::new(file))
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    dataset.write_to(BufWriter::new(file)).map_err(|e| DatasetError::io(path, e))
}
