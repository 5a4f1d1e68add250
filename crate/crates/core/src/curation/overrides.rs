use std::path::Path;

use serde::{Deserialize, Serialize};

use super::map::{check_categories, Canonical, ConsolidationMap};
use crate::error::{Error, Result};

/// One curation edit. Serialized with an `action` tag, for example
/// `{"action": "merge", "sources": [12, 13], "target": 11}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum OverrideAction {
    /// Moves every original of the source canonicals under `target`.
    Merge { sources: Vec<i64>, target: i64 },
    /// Detaches one original into a new canonical entry called `name`.
    Split { original_id: i64, name: String },
    Rename { canonical_id: i64, name: String },
    /// Marks an original as removed from the curated vocabulary.
    Remove { original_id: i64 },
    Recategorize {
        canonical_id: i64,
        categories: Vec<String>,
    },
}

/// Ordered list of curation edits; later actions see earlier results.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OverrideSet {
    pub actions: Vec<OverrideAction>,
}

impl OverrideSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Record of one applied action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub index: usize,
    pub action: OverrideAction,
    pub summary: String,
}

fn reject(index: usize, why: String) -> Error {
    Error::Override(format!("action {index}: {why}"))
}

fn require_canonical(map: &ConsolidationMap, index: usize, id: i64) -> Result<()> {
    if map.catalog.contains_key(&id) {
        Ok(())
    } else {
        Err(reject(index, format!("unknown canonical id {id}")))
    }
}

fn require_original(map: &ConsolidationMap, index: usize, id: i64) -> Result<()> {
    if map.entries.contains_key(&id) {
        Ok(())
    } else {
        Err(reject(index, format!("unknown original id {id}")))
    }
}

fn name_taken(map: &ConsolidationMap, name: &str, except: Option<i64>) -> bool {
    map.catalog
        .iter()
        .any(|(id, c)| c.name == name && Some(*id) != except)
}

fn apply_one(map: &mut ConsolidationMap, index: usize, action: &OverrideAction) -> Result<String> {
    match action {
        OverrideAction::Merge { sources, target } => {
            require_canonical(map, index, *target)?;
            if sources.is_empty() {
                return Err(reject(index, "merge without sources".to_string()));
            }
            for s in sources {
                require_canonical(map, index, *s)?;
                if s == target {
                    return Err(reject(index, format!("canonical {s} merged into itself")));
                }
            }
            let mut moved = 0;
            for entry in map.entries.values_mut() {
                if entry.canonical_id.is_some_and(|c| sources.contains(&c)) {
                    entry.canonical_id = Some(*target);
                    moved += 1;
                }
            }
            for s in sources {
                map.catalog.remove(s);
            }
            Ok(format!(
                "merged {} canonical entries into {target}; {moved} originals moved",
                sources.len()
            ))
        }
        OverrideAction::Split { original_id, name } => {
            require_original(map, index, *original_id)?;
            if name_taken(map, name, None) {
                return Err(reject(index, format!("name {name:?} already exists")));
            }
            let new_id = map.catalog.keys().next_back().map_or(1, |m| m + 1);
            let entry = map.entries.get_mut(original_id).expect("checked above");
            let inherited = entry
                .canonical_id
                .and_then(|c| map.catalog.get(&c).cloned())
                .unwrap_or_else(|| Canonical::named(""));
            entry.canonical_id = Some(new_id);
            map.catalog.insert(
                new_id,
                Canonical {
                    name: name.clone(),
                    ..inherited
                },
            );
            let dropped = map.prune_empty();
            Ok(format!(
                "original {original_id} split into new canonical {new_id}{}",
                if dropped.is_empty() {
                    String::new()
                } else {
                    format!("; emptied canonical {dropped:?} dropped")
                }
            ))
        }
        OverrideAction::Rename { canonical_id, name } => {
            require_canonical(map, index, *canonical_id)?;
            if name_taken(map, name, Some(*canonical_id)) {
                return Err(reject(index, format!("name {name:?} already exists")));
            }
            let c = map.catalog.get_mut(canonical_id).expect("checked above");
            let old = std::mem::replace(&mut c.name, name.clone());
            Ok(format!("canonical {canonical_id} renamed {old:?} -> {name:?}"))
        }
        OverrideAction::Remove { original_id } => {
            require_original(map, index, *original_id)?;
            let entry = map.entries.get_mut(original_id).expect("checked above");
            entry.canonical_id = None;
            let dropped = map.prune_empty();
            Ok(format!(
                "original {original_id} removed{}",
                if dropped.is_empty() {
                    String::new()
                } else {
                    format!("; emptied canonical {dropped:?} dropped")
                }
            ))
        }
        OverrideAction::Recategorize {
            canonical_id,
            categories,
        } => {
            require_canonical(map, index, *canonical_id)?;
            check_categories(categories).map_err(|e| reject(index, e.to_string()))?;
            map.catalog.get_mut(canonical_id).expect("checked above").categories = categories.clone();
            Ok(format!("canonical {canonical_id} categories set to {categories:?}"))
        }
    }
}

/// Applies `overrides` in order to a copy of `map`, returning the new map and
/// an audit log. The input map is left untouched; any failing action aborts
/// the whole set.
pub fn apply_overrides(
    map: &ConsolidationMap,
    overrides: &OverrideSet,
) -> Result<(ConsolidationMap, Vec<AuditEntry>)> {
    let mut out = map.clone();
    let mut log = Vec::with_capacity(overrides.actions.len());
    for (index, action) in overrides.actions.iter().enumerate() {
        let summary = apply_one(&mut out, index, action)?;
        log.push(AuditEntry {
            index,
            action: action.clone(),
            summary,
        });
    }
    out.validate()?;
    Ok((out, log))
}
