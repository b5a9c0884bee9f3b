use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::RolloutResult;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RolloutKey {
    pub sample_id: String,
    pub backend_id: String,
    pub n: u32,
    pub seed: u64,
}

impl RolloutKey {
    pub fn new(sample_id: &str, backend_id: &str, n: u32, seed: u64) -> Self {
        Self { sample_id: sample_id.into(), backend_id: backend_id.into(), n, seed }
    }
}

/// Rollout results keyed by `(sample_id, backend_id, n, seed)`, persisted
/// as one JSON record per line. New results are appended, so a rerun over
/// the same inputs leaves the file untouched.
#[derive(Debug, Default, Clone)]
pub struct RolloutCache {
    entries: Vec<RolloutResult>,
    index: HashMap<RolloutKey, usize>,
}

impl RolloutCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads a cache file; a missing file is an empty cache. Later records
    /// win over earlier ones with the same key.
    pub fn load(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref();
        let mut cache = Self::new();
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(e),
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let result: RolloutResult = serde_json::from_str(&line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), i + 1)))?;
            if !result.is_consistent() {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}:{}: pass_count disagrees with per-rollout records", path.display(), i + 1),
                ));
            }
            cache.insert(result);
        }
        Ok(cache)
    }

    pub fn get(&self, key: &RolloutKey) -> Option<&RolloutResult> {
        self.index.get(key).map(|&i| &self.entries[i])
    }

    pub fn insert(&mut self, result: RolloutResult) {
        match self.index.get(&result.key()) {
            Some(&i) => self.entries[i] = result,
            None => {
                self.index.insert(result.key(), self.entries.len());
                self.entries.push(result);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RolloutResult> {
        self.entries.iter()
    }

    /// Latest result for `sample_id` regardless of backend, n or seed.
    pub fn latest_for(&self, sample_id: &str) -> Option<&RolloutResult> {
        self.entries.iter().rev().find(|r| r.sample_id == sample_id)
    }

    /// Appends `results` to `path` (creating it if needed), one per line.
    pub fn append_to(path: impl AsRef<Path>, results: &[RolloutResult]) -> io::Result<()> {
        if results.is_empty() {
            return Ok(());
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut w = BufWriter::new(file);
        for r in results {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }
}
