use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Cuisine associations for a pool of entities.
///
/// Every key of `tags` is a pool member; an empty list marks an untagged
/// member, which still takes part as a neighbour.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuisineTags {
    /// Free-text description of how the pool was selected.
    pub pool_spec: String,
    pub clusters: Vec<String>,
    pub tags: BTreeMap<String, Vec<String>>,
}

impl CuisineTags {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let tags: Self = serde_json::from_str(text)?;
        tags.validate()?;
        Ok(tags)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Json(inner) => Error::Format(format!("{}: {inner}", path.display())),
            other => other,
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let catalog: BTreeSet<&str> = self.clusters.iter().map(String::as_str).collect();
        if catalog.len() != self.clusters.len() {
            return Err(Error::Format("cluster names must be unique".into()));
        }
        for (name, cuisines) in &self.tags {
            if let Some(bad) = cuisines.iter().find(|c| !catalog.contains(c.as_str())) {
                return Err(Error::InvalidLabel(format!(
                    "{name}: cuisine {bad:?} is not in the cluster catalog"
                )));
            }
        }
        Ok(())
    }

    pub fn pool_size(&self) -> usize {
        self.tags.len()
    }

    /// Number of pool members tagged with each cluster, in catalog order.
    pub fn counts(&self) -> Vec<usize> {
        self.clusters
            .iter()
            .map(|c| self.tags.values().filter(|t| t.contains(c)).count())
            .collect()
    }

    /// Resolves the pool against a matrix, ordered by entity id.
    pub fn index(&self, matrix: &EmbeddingMatrix) -> Result<TagIndex> {
        let mut items: Vec<(usize, Vec<usize>)> = Vec::with_capacity(self.tags.len());
        for (name, cuisines) in &self.tags {
            let row = matrix.require_name(name)?;
            let mut idx: Vec<usize> = cuisines
                .iter()
                .map(|c| self.clusters.iter().position(|k| k == c).expect("validated"))
                .collect();
            idx.sort_unstable();
            idx.dedup();
            items.push((row, idx));
        }
        items.sort_by_key(|(row, _)| matrix.entity(*row).id);
        let (rows, tags) = items.into_iter().unzip();
        Ok(TagIndex {
            clusters: self.clusters.clone(),
            rows,
            tags,
        })
    }
}

/// Pool rows and their cuisine indices, ordered by entity id.
#[derive(Debug, Clone, PartialEq)]
pub struct TagIndex {
    pub clusters: Vec<String>,
    pub rows: Vec<usize>,
    pub tags: Vec<Vec<usize>>,
}

impl TagIndex {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Pool positions tagged with cluster `c`.
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.tags[i].contains(&c)).collect()
    }

    pub fn tagged(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.tags[i].is_empty()).collect()
    }
}
