//! Input hashing and report envelopes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_bytes(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

/// What produced a report: the command, its inputs by content hash, and the
/// master seed when the command is randomized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub tool_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<InputHash>,
}

impl Provenance {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    provenance: &'a Provenance,
    report: &'a T,
}

/// Where a command writes its reports.
pub struct ReportDir {
    pub dir: PathBuf,
    pub provenance: Provenance,
    pub written: Vec<PathBuf>,
}

impl ReportDir {
    pub fn create(dir: &Path, provenance: Provenance) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            provenance,
            written: Vec::new(),
        })
    }

    /// Pretty JSON `{provenance, report}` with a trailing newline.
    pub fn json<T: Serialize>(&mut self, file: &str, report: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(&Envelope {
            provenance: &self.provenance,
            report,
        })?;
        text.push('\n');
        self.bytes(file, text.as_bytes())
    }

    pub fn bytes(&mut self, file: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(file);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Runs a CSV writer into a buffer and saves it.
    pub fn csv(&mut self, file: &str, write: impl FnOnce(&mut Vec<u8>) -> palate::Result<()>) -> Result<PathBuf> {
        let mut buf = Vec::new();
        write(&mut buf).with_context(|| format!("rendering {file}"))?;
        self.bytes(file, &buf)
    }
}
