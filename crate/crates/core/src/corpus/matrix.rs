use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named row of an [`EmbeddingMatrix`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: i64,
    pub name: String,
}

impl Entity {
    pub fn new(id: i64, name: impl Into<String>) -> Self {
        Self {
            id,
            name: name.into(),
        }
    }
}

/// Entity vectors of a fixed dimension, stored row-major.
///
/// Ids and names are unique and every component is finite. Zero vectors may
/// be loaded, but every cosine-based operation rejects them.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    entities: Vec<Entity>,
    data: Vec<f64>,
    dim: usize,
    by_id: HashMap<i64, usize>,
    by_name: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(entities: Vec<Entity>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if entities.len() != rows.len() {
            return Err(Error::invalid(format!(
                "{} entities but {} vectors",
                entities.len(),
                rows.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(entities, data, dim)
    }

    pub fn from_flat(entities: Vec<Entity>, data: Vec<f64>, dim: usize) -> Result<Self> {
        if data.len() != entities.len() * dim {
            return Err(Error::invalid(format!(
                "flat buffer of {} values does not hold {} rows of dimension {dim}",
                data.len(),
                entities.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let row = pos / dim.max(1);
            return Err(Error::invalid(format!(
                "non-finite value for id {}",
                entities[row].id
            )));
        }
        let mut by_id = HashMap::with_capacity(entities.len());
        let mut by_name = HashMap::with_capacity(entities.len());
        for (row, entity) in entities.iter().enumerate() {
            if by_id.insert(entity.id, row).is_some() {
                return Err(Error::DuplicateId(entity.id));
            }
            if by_name.insert(entity.name.clone(), row).is_some() {
                return Err(Error::DuplicateName(entity.name.clone()));
            }
        }
        Ok(Self {
            entities,
            data,
            dim,
            by_id,
            by_name,
        })
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn entity(&self, row: usize) -> &Entity {
        &self.entities[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        self.data.chunks_exact(self.dim.max(1)).take(self.len())
    }

    pub fn row_of_id(&self, id: i64) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    pub fn row_of_name(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn require_id(&self, id: i64) -> Result<usize> {
        self.row_of_id(id).ok_or(Error::UnknownId(id))
    }

    pub fn require_name(&self, name: &str) -> Result<usize> {
        self.row_of_name(name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn vector(&self, id: i64) -> Option<&[f64]> {
        self.row_of_id(id).map(|r| self.row(r))
    }

    /// Row indices ordered by ascending entity id.
    pub fn rows_by_id(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = (0..self.len()).collect();
        rows.sort_by_key(|&r| self.entities[r].id);
        rows
    }

    /// New matrix holding only `ids`, in the given order.
    pub fn subset(&self, ids: &[i64]) -> Result<Self> {
        let mut entities = Vec::with_capacity(ids.len());
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            let row = self.require_id(id)?;
            entities.push(self.entities[row].clone());
            data.extend_from_slice(self.row(row));
        }
        Self::from_flat(entities, data, self.dim)
    }

    /// Copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let data = self.data.iter().map(|v| v * factor).collect();
        Self::from_flat(self.entities.clone(), data, self.dim)
    }

    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(file, &path.display().to_string())
    }

    /// Parses the `id<TAB>name<TAB>v1..vD` format. `source` names the input
    /// in error messages.
    pub fn read_tsv(reader: impl Read, source: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut entities = Vec::new();
        let mut data = Vec::new();
        let mut dim: Option<usize> = None;
        let mut by_id: HashMap<i64, usize> = HashMap::new();
        let mut by_name: HashMap<String, usize> = HashMap::new();
        let mut saw_header = false;

        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if !saw_header {
                let mut cols = line.split('\t');
                if cols.next() != Some("id") || cols.next() != Some("name") {
                    return Err(parse_err(
                        lineno,
                        "header must start with id<TAB>name".to_string(),
                    ));
                }
                saw_header = true;
                continue;
            }
            let mut cols = line.split('\t');
            let id_field = cols.next().unwrap_or_default();
            let id: i64 = id_field
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid id {id_field:?}")))?;
            let name = cols
                .next()
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| parse_err(lineno, "missing name".to_string()))?
                .to_string();
            let start = data.len();
            for field in cols {
                let value: f64 = field.trim().parse().map_err(|_| {
                    parse_err(lineno, format!("invalid number {field:?}"))
                })?;
                if !value.is_finite() {
                    return Err(parse_err(lineno, format!("non-finite value {field:?}")));
                }
                data.push(value);
            }
            let width = data.len() - start;
            match dim {
                None => {
                    if width == 0 {
                        return Err(parse_err(lineno, "row has no vector values".to_string()));
                    }
                    dim = Some(width);
                }
                Some(d) if d != width => {
                    return Err(parse_err(
                        lineno,
                        format!("dimension mismatch: expected {d} values, found {width}"),
                    ));
                }
                Some(_) => {}
            }
            let row = entities.len();
            if by_id.insert(id, row).is_some() {
                return Err(parse_err(lineno, format!("duplicate id {id}")));
            }
            if by_name.insert(name.clone(), row).is_some() {
                return Err(parse_err(lineno, format!("duplicate name {name:?}")));
            }
            entities.push(Entity { id, name });
        }
        if !saw_header {
            return Err(parse_err(1, "empty embeddings file".to_string()));
        }
        Ok(Self {
            entities,
            data,
            dim: dim.unwrap_or(0),
            by_id,
            by_name,
        })
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_tsv(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Floats are written in shortest round-trip form, so reloading is exact.
    pub fn write_tsv(&self, out: &mut impl Write) -> std::io::Result<()> {
        write!(out, "id\tname")?;
        for d in 1..=self.dim {
            write!(out, "\tv{d}")?;
        }
        writeln!(out)?;
        for (row, entity) in self.entities.iter().enumerate() {
            write!(out, "{}\t{}", entity.id, entity.name)?;
            for v in self.row(row) {
                write!(out, "\t{v:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Lowercases and joins whitespace-separated words with underscores.
pub fn normalize_name(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}
