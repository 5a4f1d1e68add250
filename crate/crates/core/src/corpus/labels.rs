use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Ordinal,
    Binary,
    Numeric,
    Tags,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelValue {
    Level(String),
    Flag(bool),
    Number(f64),
    /// Tag sets and category memberships, kept sorted and deduplicated.
    Set(Vec<String>),
}

impl LabelValue {
    pub fn as_set(&self) -> Option<&[String]> {
        match self {
            LabelValue::Set(s) => Some(s),
            _ => None,
        }
    }
}

/// Per-entity labels for one dimension, keyed by entity name.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub dimension: String,
    pub kind: LabelKind,
    /// Ordered levels, lowest first. Only used by ordinal sets.
    pub scale: Vec<String>,
    pub units: Option<String>,
    labels: BTreeMap<String, LabelValue>,
    /// Names whose value was `null` or `N/A`; they carry no label.
    pub missing: Vec<String>,
}

/// On-disk shape of a label file.
#[derive(Debug, Serialize, Deserialize)]
struct LabelFile {
    dimension: String,
    kind: LabelKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    scale: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<String>,
    labels: BTreeMap<String, Value>,
}

fn is_missing(value: &Value) -> bool {
    match value {
        Value::Null => true,
        Value::String(s) => s.eq_ignore_ascii_case("n/a"),
        _ => false,
    }
}

impl LabelSet {
    pub fn new(dimension: impl Into<String>, kind: LabelKind) -> Self {
        Self {
            dimension: dimension.into(),
            kind,
            scale: Vec::new(),
            units: None,
            labels: BTreeMap::new(),
            missing: Vec::new(),
        }
    }

    pub fn ordinal(dimension: impl Into<String>, scale: &[&str]) -> Self {
        let mut set = Self::new(dimension, LabelKind::Ordinal);
        set.scale = scale.iter().map(|s| s.to_string()).collect();
        set
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = Some(units.into());
        self
    }

    /// Inserts after checking the value against the set's kind and scale.
    pub fn insert(&mut self, name: impl Into<String>, value: LabelValue) -> Result<()> {
        let name = name.into();
        let value = self.check(&name, value)?;
        self.labels.insert(name, value);
        Ok(())
    }

    fn check(&self, name: &str, value: LabelValue) -> Result<LabelValue> {
        let bad = |why: String| Error::InvalidLabel(format!("{}/{name}: {why}", self.dimension));
        match (self.kind, value) {
            (LabelKind::Ordinal, LabelValue::Level(level)) => {
                if self.scale.iter().any(|s| *s == level) {
                    Ok(LabelValue::Level(level))
                } else {
                    Err(bad(format!("level {level:?} not in scale {:?}", self.scale)))
                }
            }
            (LabelKind::Binary, v @ LabelValue::Flag(_)) => Ok(v),
            (LabelKind::Numeric, LabelValue::Number(x)) => {
                if x.is_finite() {
                    Ok(LabelValue::Number(x))
                } else {
                    Err(bad(format!("non-finite value {x}")))
                }
            }
            (LabelKind::Categorical, LabelValue::Level(level)) => Ok(LabelValue::Set(vec![level])),
            (LabelKind::Tags | LabelKind::Categorical, LabelValue::Set(items)) => {
                let set: BTreeSet<String> = items.into_iter().collect();
                if self.kind == LabelKind::Categorical && set.is_empty() {
                    return Err(bad("empty category list".to_string()));
                }
                Ok(LabelValue::Set(set.into_iter().collect()))
            }
            (kind, v) => Err(bad(format!("value {v:?} does not fit kind {kind:?}"))),
        }
    }

    fn value_from_json(&self, name: &str, raw: &Value) -> Result<LabelValue> {
        let bad = |why: &str| {
            Error::InvalidLabel(format!("{}/{name}: {why}: {raw}", self.dimension))
        };
        let value = match self.kind {
            LabelKind::Ordinal => match raw {
                Value::String(s) => LabelValue::Level(s.clone()),
                Value::Number(n) => LabelValue::Level(n.to_string()),
                _ => return Err(bad("expected a level")),
            },
            LabelKind::Binary => match raw {
                Value::Bool(b) => LabelValue::Flag(*b),
                Value::String(s) if s.eq_ignore_ascii_case("yes") => LabelValue::Flag(true),
                Value::String(s) if s.eq_ignore_ascii_case("no") => LabelValue::Flag(false),
                _ => return Err(bad("expected yes or no")),
            },
            LabelKind::Numeric => match raw.as_f64() {
                Some(x) => LabelValue::Number(x),
                None => return Err(bad("expected a number")),
            },
            LabelKind::Tags | LabelKind::Categorical => match raw {
                Value::String(s) => LabelValue::Set(vec![s.clone()]),
                Value::Array(items) => LabelValue::Set(
                    items
                        .iter()
                        .map(|v| v.as_str().map(str::to_string).ok_or_else(|| bad("expected strings")))
                        .collect::<Result<_>>()?,
                ),
                _ => return Err(bad("expected a string list")),
            },
        };
        self.check(name, value)
    }

    fn value_to_json(&self, value: &LabelValue) -> Value {
        match value {
            LabelValue::Level(s) => Value::String(s.clone()),
            LabelValue::Flag(b) => Value::String(if *b { "yes" } else { "no" }.to_string()),
            LabelValue::Number(x) => serde_json::json!(x),
            LabelValue::Set(items) if self.kind == LabelKind::Categorical && items.len() == 1 => {
                Value::String(items[0].clone())
            }
            LabelValue::Set(items) => serde_json::json!(items),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: LabelFile = serde_json::from_str(text)?;
        if file.kind == LabelKind::Ordinal && file.scale.len() < 2 {
            return Err(Error::InvalidLabel(format!(
                "{}: ordinal label sets need a scale of at least two levels",
                file.dimension
            )));
        }
        let mut set = Self {
            dimension: file.dimension,
            kind: file.kind,
            scale: file.scale,
            units: file.units,
            labels: BTreeMap::new(),
            missing: Vec::new(),
        };
        for (name, raw) in &file.labels {
            if is_missing(raw) {
                set.missing.push(name.clone());
                continue;
            }
            let value = set.value_from_json(name, raw)?;
            set.labels.insert(name.clone(), value);
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Json(inner) => Error::Format(format!("{}: {inner}", path.display())),
            other => other,
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut labels: BTreeMap<String, Value> = self
            .labels
            .iter()
            .map(|(k, v)| (k.clone(), self.value_to_json(v)))
            .collect();
        for name in &self.missing {
            labels.entry(name.clone()).or_insert(Value::Null);
        }
        let file = LabelFile {
            dimension: self.dimension.clone(),
            kind: self.kind,
            scale: self.scale.clone(),
            units: self.units.clone(),
            labels,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&LabelValue> {
        self.labels.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LabelValue)> {
        self.labels.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    /// Position of a level in the scale.
    pub fn level_rank(&self, level: &str) -> Option<usize> {
        self.scale.iter().position(|s| s == level)
    }

    /// Scalar view used by projections: scale rank for ordinal values,
    /// 1/0 for flags, the value itself for numbers.
    pub fn scalar(&self, value: &LabelValue) -> Option<f64> {
        match value {
            LabelValue::Level(l) => self.level_rank(l).map(|r| r as f64),
            LabelValue::Flag(b) => Some(if *b { 1.0 } else { 0.0 }),
            LabelValue::Number(x) => Some(*x),
            LabelValue::Set(_) => None,
        }
    }

    /// Keeps only the labels whose name passes `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        let mut out = self.clone();
        out.labels.retain(|name, _| keep(name));
        out.missing.retain(|name| keep(name));
        out
    }

    /// Pairs each label with its matrix row, ordered by entity id.
    /// Fails on names absent from the matrix.
    pub fn resolve<'a>(&'a self, matrix: &EmbeddingMatrix) -> Result<Vec<(usize, &'a LabelValue)>> {
        let mut out = Vec::with_capacity(self.labels.len());
        for (name, value) in &self.labels {
            out.push((matrix.require_name(name)?, value));
        }
        out.sort_by_key(|(row, _)| matrix.entity(*row).id);
        Ok(out)
    }
}
