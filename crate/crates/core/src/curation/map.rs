use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingMatrix, Entity, LabelKind, LabelSet, LabelValue};
use crate::error::{Error, Result};

/// The fixed category taxonomy used by canonical catalogs.
pub const TAXONOMY: [&str; 18] = [
    "Meat", "Fish", "Seafood", "Dairy", "Veg", "Fruit", "Herbs", "Spice", "Nuts", "Legumes",
    "Grain", "Fat", "Sweet", "Condiment", "Beverage", "Pantry", "Protein", "Produce",
];

pub const MAX_CATEGORIES: usize = 3;

pub fn check_categories(categories: &[String]) -> Result<()> {
    if categories.len() > MAX_CATEGORIES {
        return Err(Error::InvalidLabel(format!(
            "at most {MAX_CATEGORIES} categories allowed, got {}",
            categories.len()
        )));
    }
    if let Some(bad) = categories.iter().find(|c| !TAXONOMY.contains(&c.as_str())) {
        return Err(Error::InvalidLabel(format!("unknown category {bad:?}")));
    }
    let unique: BTreeSet<&String> = categories.iter().collect();
    if unique.len() != categories.len() {
        return Err(Error::InvalidLabel("repeated category".to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canonical {
    pub name: String,
    pub categories: Vec<String>,
    pub vegetarian: bool,
    pub vegan: bool,
}

impl Canonical {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            categories: Vec::new(),
            vegetarian: false,
            vegan: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapEntry {
    pub original_name: String,
    /// `None` marks a removed entry.
    pub canonical_id: Option<i64>,
}

/// Many-to-one mapping from original entities to canonical entries, plus the
/// catalog describing each canonical entry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConsolidationMap {
    pub(crate) entries: BTreeMap<i64, MapEntry>,
    pub(crate) catalog: BTreeMap<i64, Canonical>,
}

#[derive(Debug, Deserialize)]
struct MapRow {
    original_id: i64,
    original_name: String,
    canonical_id: Option<i64>,
    canonical_name: Option<String>,
}

#[derive(Debug, Deserialize)]
struct CatalogRow {
    canonical_id: i64,
    name: String,
    #[serde(default)]
    categories: String,
    #[serde(default)]
    vegetarian: String,
    #[serde(default)]
    vegan: String,
}

fn parse_flag(raw: &str, what: &str, id: i64) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "" | "false" | "no" | "0" => Ok(false),
        "true" | "yes" | "1" => Ok(true),
        other => Err(Error::Format(format!(
            "canonical {id}: {what} flag {other:?} is not a boolean"
        ))),
    }
}

impl ConsolidationMap {
    /// Builds and validates a map from its parts.
    pub fn new(entries: BTreeMap<i64, MapEntry>, catalog: BTreeMap<i64, Canonical>) -> Result<Self> {
        let map = Self { entries, catalog };
        map.validate()?;
        Ok(map)
    }

    /// Every original maps to itself under its own name.
    pub fn identity(matrix: &EmbeddingMatrix) -> Self {
        let mut map = Self::default();
        for e in matrix.entities() {
            map.entries.insert(
                e.id,
                MapEntry {
                    original_name: e.name.clone(),
                    canonical_id: Some(e.id),
                },
            );
            map.catalog.insert(e.id, Canonical::named(e.name.clone()));
        }
        map
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for (id, c) in &self.catalog {
            if !names.insert(c.name.as_str()) {
                return Err(Error::DuplicateName(c.name.clone()));
            }
            check_categories(&c.categories)
                .map_err(|e| Error::Format(format!("canonical {id}: {e}")))?;
        }
        for (orig, entry) in &self.entries {
            if let Some(c) = entry.canonical_id {
                if !self.catalog.contains_key(&c) {
                    return Err(Error::Format(format!(
                        "original {orig} maps to canonical {c}, which is not in the catalog"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<i64, MapEntry> {
        &self.entries
    }

    pub fn catalog(&self) -> &BTreeMap<i64, Canonical> {
        &self.catalog
    }

    pub fn canonical(&self, id: i64) -> Option<&Canonical> {
        self.catalog.get(&id)
    }

    pub fn canonical_by_name(&self, name: &str) -> Option<i64> {
        self.catalog.iter().find(|(_, c)| c.name == name).map(|(id, _)| *id)
    }

    /// Originals per canonical id, both in ascending id order. Canonicals
    /// without members appear with an empty list.
    pub fn groups(&self) -> BTreeMap<i64, Vec<i64>> {
        let mut groups: BTreeMap<i64, Vec<i64>> =
            self.catalog.keys().map(|id| (*id, Vec::new())).collect();
        for (orig, entry) in &self.entries {
            if let Some(c) = entry.canonical_id {
                groups.entry(c).or_default().push(*orig);
            }
        }
        groups
    }

    pub fn removed(&self) -> Vec<i64> {
        self.entries
            .iter()
            .filter(|(_, e)| e.canonical_id.is_none())
            .map(|(id, _)| *id)
            .collect()
    }

    /// Drops catalog entries that no original maps to.
    pub(crate) fn prune_empty(&mut self) -> Vec<i64> {
        let used: BTreeSet<i64> = self.entries.values().filter_map(|e| e.canonical_id).collect();
        let empty: Vec<i64> = self
            .catalog
            .keys()
            .filter(|id| !used.contains(id))
            .copied()
            .collect();
        for id in &empty {
            self.catalog.remove(id);
        }
        empty
    }

    /// Reads the map CSV and, optionally, a catalog CSV. Canonicals absent from
    /// the catalog are created from the names in the map file.
    pub fn read_csv(map: impl Read, catalog: Option<impl Read>) -> Result<Self> {
        let mut out = Self::default();
        if let Some(reader) = catalog {
            let mut rdr = csv::Reader::from_reader(reader);
            for row in rdr.deserialize() {
                let row: CatalogRow = row?;
                let categories: Vec<String> = row
                    .categories
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
                let canonical = Canonical {
                    name: row.name,
                    categories,
                    vegetarian: parse_flag(&row.vegetarian, "vegetarian", row.canonical_id)?,
                    vegan: parse_flag(&row.vegan, "vegan", row.canonical_id)?,
                };
                if out.catalog.insert(row.canonical_id, canonical).is_some() {
                    return Err(Error::DuplicateId(row.canonical_id));
                }
            }
        }
        let mut rdr = csv::Reader::from_reader(map);
        for row in rdr.deserialize() {
            let row: MapRow = row?;
            if let (Some(cid), Some(cname)) = (row.canonical_id, row.canonical_name.as_ref()) {
                match out.catalog.get(&cid) {
                    Some(existing) if existing.name != *cname => {
                        return Err(Error::Format(format!(
                            "canonical {cid} is named {:?} in the catalog but {cname:?} in the map",
                            existing.name
                        )));
                    }
                    Some(_) => {}
                    None => {
                        out.catalog.insert(cid, Canonical::named(cname.clone()));
                    }
                }
            }
            let entry = MapEntry {
                original_name: row.original_name,
                canonical_id: row.canonical_id,
            };
            if out.entries.insert(row.original_id, entry).is_some() {
                return Err(Error::DuplicateId(row.original_id));
            }
        }
        out.validate()?;
        Ok(out)
    }

    pub fn load(map_path: impl AsRef<Path>, catalog_path: Option<&Path>) -> Result<Self> {
        let map_path = map_path.as_ref();
        let map_file = std::fs::File::open(map_path).map_err(|e| Error::io(map_path, e))?;
        let catalog_file = catalog_path
            .map(|p| std::fs::File::open(p).map_err(|e| Error::io(p, e)))
            .transpose()?;
        Self::read_csv(map_file, catalog_file)
    }

    pub fn write_map_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["original_id", "original_name", "canonical_id", "canonical_name"])?;
        for (orig, entry) in &self.entries {
            let (cid, cname) = match entry.canonical_id {
                Some(c) => (c.to_string(), self.catalog[&c].name.clone()),
                None => (String::new(), String::new()),
            };
            w.write_record([orig.to_string(), entry.original_name.clone(), cid, cname])?;
        }
        w.flush().map_err(|e| Error::io("<map csv>", e))?;
        Ok(())
    }

    pub fn write_catalog_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["canonical_id", "name", "categories", "vegetarian", "vegan"])?;
        for (id, c) in &self.catalog {
            w.write_record([
                id.to_string(),
                c.name.clone(),
                c.categories.join(";"),
                c.vegetarian.to_string(),
                c.vegan.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<catalog csv>", e))?;
        Ok(())
    }

    pub fn save(&self, map_path: impl AsRef<Path>, catalog_path: impl AsRef<Path>) -> Result<()> {
        let (mp, cp) = (map_path.as_ref(), catalog_path.as_ref());
        let f = std::fs::File::create(mp).map_err(|e| Error::io(mp, e))?;
        self.write_map_csv(std::io::BufWriter::new(f))?;
        let f = std::fs::File::create(cp).map_err(|e| Error::io(cp, e))?;
        self.write_catalog_csv(std::io::BufWriter::new(f))
    }
}

/// Averages member embeddings into one row per canonical entry.
///
/// Rows follow ascending canonical id and carry the canonical name. Removed
/// originals are left out; entities absent from the map are ignored.
pub fn consolidate(matrix: &EmbeddingMatrix, map: &ConsolidationMap) -> Result<EmbeddingMatrix> {
    for orig in map.entries.keys() {
        matrix.require_id(*orig)?;
    }
    let dim = matrix.dim();
    let groups = map.groups();
    let mut entities = Vec::with_capacity(groups.len());
    let mut data = Vec::with_capacity(groups.len() * dim);
    for (cid, members) in &groups {
        if members.is_empty() {
            return Err(Error::degenerate(format!(
                "canonical {cid} ({}) has no remaining members",
                map.catalog[cid].name
            )));
        }
        let mut sum = vec![0.0; dim];
        for orig in members {
            let row = matrix.row(matrix.require_id(*orig)?);
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v;
            }
        }
        let k = members.len() as f64;
        data.extend(sum.into_iter().map(|s| s / k));
        entities.push(Entity::new(*cid, map.catalog[cid].name.clone()));
    }
    EmbeddingMatrix::from_flat(entities, data, dim)
}

/// Category labels over original names, inherited from each original's
/// canonical entry. Removed originals and uncategorized canonicals are listed
/// as missing.
pub fn back_project(map: &ConsolidationMap) -> LabelSet {
    let mut labels = LabelSet::new("category", LabelKind::Categorical);
    for entry in map.entries.values() {
        let categories = entry
            .canonical_id
            .map(|c| map.catalog[&c].categories.clone())
            .unwrap_or_default();
        if categories.is_empty() {
            labels.missing.push(entry.original_name.clone());
        } else {
            labels
                .insert(entry.original_name.clone(), LabelValue::Set(categories))
                .expect("categorical sets accept nonempty category lists");
        }
    }
    labels
}
