//! Run manifests and their verification.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

use super::config::ExperimentConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(root: &Path, rel: &Path) -> Result<Self> {
        let full = root.join(rel);
        let bytes = std::fs::metadata(&full)
            .map_err(|e| Error::io(&full, e))?
            .len();
        Ok(FileDigest {
            path: rel.to_path_buf(),
            sha256: io::sha256_file(&full)?,
            bytes,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRecord {
    pub signal: String,
    /// `bound` for a rigorous bound, `estimate` for a probe-based estimate.
    pub kind: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub config: ExperimentConfig,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub stages: Vec<StageTiming>,
    pub truncation_errors: Vec<TruncationRecord>,
    pub checks: Vec<CheckResult>,
}

impl RunManifest {
    pub fn checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub missing: Vec<PathBuf>,
    pub mismatched: Vec<PathBuf>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.missing.is_empty() && self.mismatched.is_empty()
    }
}

/// Re-hashes every output listed in the manifest at `manifest_path`.
pub fn verify_manifest(manifest_path: &Path) -> Result<VerifyReport> {
    let manifest = RunManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let mut report = VerifyReport::default();
    for f in &manifest.outputs {
        report.checked += 1;
        let full = root.join(&f.path);
        if !full.exists() {
            report.missing.push(f.path.clone());
        } else if io::sha256_file(&full)? != f.sha256 {
            report.mismatched.push(f.path.clone());
        }
    }
    Ok(report)
}
