use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::detector::ShotRecord;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordRole {
    /// Part of the probe-amplitude sweep.
    Sweep,
    /// Dedicated calibration series.
    Calibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    /// Path relative to the manifest directory.
    pub file: String,
    pub role: RecordRole,
    pub alpha_mag: f64,
    pub eta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub reconstruct_eta: f64,
    pub records: Vec<RecordEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Accepts either the manifest file or the run directory holding it.
    pub fn resolve(path: &Path) -> PathBuf {
        if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        }
    }

    /// Records used for calibration: the dedicated series when present,
    /// otherwise the sweep records at the largest probe amplitude.
    pub fn calibration_entries(&self) -> Vec<&RecordEntry> {
        let dedicated: Vec<_> = self
            .records
            .iter()
            .filter(|r| r.role == RecordRole::Calibration)
            .collect();
        if !dedicated.is_empty() {
            return dedicated;
        }
        let top = self
            .records
            .iter()
            .map(|r| r.alpha_mag)
            .fold(f64::MIN, f64::max);
        self.records
            .iter()
            .filter(|r| r.role == RecordRole::Sweep && r.alpha_mag == top)
            .collect()
    }

    /// Sweep records taken at the reconstruction efficiency.
    pub fn section_entries(&self) -> Vec<&RecordEntry> {
        self.records
            .iter()
            .filter(|r| r.role == RecordRole::Sweep && r.eta == self.reconstruct_eta)
            .collect()
    }

    pub fn load_records(dir: &Path, entries: &[&RecordEntry]) -> Result<Vec<ShotRecord>> {
        entries
            .iter()
            .map(|e| ShotRecord::load(&dir.join(&e.file)))
            .collect()
    }
}
