//! A workspace directory described by `workspace.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use palate::corpus::{EmbeddingMatrix, LabelSet};
use palate::culture::CuisineTags;
use palate::curation::{ConsolidationMap, OverrideSet};

use crate::provenance::{sha256_bytes, sha256_file};

pub const MANIFEST: &str = "workspace.json";

/// Paths are relative to the workspace directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub seed: u64,
    pub embeddings: PathBuf,
    pub map: PathBuf,
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    #[serde(default = "default_overrides")]
    pub overrides: PathBuf,
    #[serde(default)]
    pub labels: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub tags: Option<PathBuf>,
    #[serde(default)]
    pub coords3d: Option<PathBuf>,
    /// Canonical ids of the sweet and savoury poles for the 3D view.
    #[serde(default)]
    pub sweet: Vec<i64>,
    #[serde(default)]
    pub savoury: Vec<i64>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_n_perm")]
    pub n_perm: usize,
}

fn default_overrides() -> PathBuf {
    PathBuf::from("overrides.json")
}

fn default_k() -> usize {
    10
}

fn default_n_perm() -> usize {
    199
}

/// Everything loaded from a workspace except the override log's effect.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub manifest: Manifest,
    manifest_bytes: Vec<u8>,
    pub raw: EmbeddingMatrix,
    pub base_map: ConsolidationMap,
    pub labels: BTreeMap<String, LabelSet>,
    pub tags: Option<CuisineTags>,
    pub coords: Option<BTreeMap<i64, [f64; 3]>>,
}

impl Workspace {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest_path = root.join(MANIFEST);
        let manifest_bytes = fs::read(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
        let manifest: Manifest =
            serde_json::from_slice(&manifest_bytes).with_context(|| format!("parsing {}", manifest_path.display()))?;
        let path = |p: &Path| root.join(p);
        let raw = EmbeddingMatrix::load_tsv(path(&manifest.embeddings))?;
        let catalog = manifest.catalog.as_deref().map(path);
        let base_map = ConsolidationMap::load(path(&manifest.map), catalog.as_deref())?;
        let labels = manifest
            .labels
            .iter()
            .map(|(name, p)| Ok((name.clone(), LabelSet::load(path(p))?)))
            .collect::<Result<_>>()?;
        let tags = manifest.tags.as_deref().map(|p| CuisineTags::load(path(p))).transpose()?;
        let coords = match &manifest.coords3d {
            Some(p) => {
                let p = path(p);
                let file = fs::File::open(&p).with_context(|| format!("reading {}", p.display()))?;
                Some(palate::axes::read_coords_csv(file)?)
            }
            None => None,
        };
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
            manifest_bytes,
            raw,
            base_map,
            labels,
            tags,
            coords,
        })
    }

    pub fn overrides_path(&self) -> PathBuf {
        self.root.join(&self.manifest.overrides)
    }

    /// The override log, empty when the file does not exist yet.
    pub fn load_overrides(&self) -> Result<OverrideSet> {
        let p = self.overrides_path();
        if !p.exists() {
            return Ok(OverrideSet::default());
        }
        Ok(OverrideSet::load(&p)?)
    }

    /// Hash over the manifest and the current content of every file it
    /// names, the override log included.
    pub fn manifest_hash(&self) -> Result<String> {
        let m = &self.manifest;
        let mut files: Vec<(&str, &Path)> = vec![("embeddings", &m.embeddings), ("map", &m.map)];
        if let Some(c) = &m.catalog {
            files.push(("catalog", c));
        }
        let label_keys: Vec<String> = m.labels.keys().map(|k| format!("labels/{k}")).collect();
        for (key, p) in label_keys.iter().zip(m.labels.values()) {
            files.push((key, p));
        }
        if let Some(t) = &m.tags {
            files.push(("tags", t));
        }
        if let Some(c) = &m.coords3d {
            files.push(("coords3d", c));
        }
        let mut text = format!("manifest {}\n", sha256_bytes(&self.manifest_bytes));
        for (key, p) in files {
            text.push_str(&format!("{key} {}\n", sha256_file(&self.root.join(p))?));
        }
        let overrides = self.overrides_path();
        let o = if overrides.exists() { sha256_file(&overrides)? } else { "absent".to_string() };
        text.push_str(&format!("overrides {o}\n"));
        Ok(sha256_bytes(text.as_bytes()))
    }

    /// Replaces the override log atomically.
    pub fn save_overrides(&self, set: &OverrideSet) -> Result<()> {
        let path = self.overrides_path();
        let tmp = path.with_extension("json.tmp");
        let mut text = serde_json::to_string_pretty(set)?;
        text.push('\n');
        fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("replacing {}", path.display()))?;
        Ok(())
    }
}
