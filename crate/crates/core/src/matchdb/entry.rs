use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub amount: f64,
    pub units: String,
}

/// One database row: a raw description and its measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbEntry {
    pub entry_id: String,
    pub description: String,
    pub values: BTreeMap<String, Measurement>,
}

impl DbEntry {
    pub fn new(entry_id: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            entry_id: entry_id.into(),
            description: description.into(),
            values: BTreeMap::new(),
        }
    }

    pub fn with_value(mut self, nutrient: impl Into<String>, amount: f64, units: impl Into<String>) -> Self {
        self.values.insert(
            nutrient.into(),
            Measurement {
                amount,
                units: units.into(),
            },
        );
        self
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct LongRow {
    entry_id: String,
    description: String,
    #[serde(default)]
    nutrient: String,
    #[serde(default)]
    amount: Option<f64>,
    #[serde(default)]
    units: String,
}

/// Reads long-form `entry_id,description,nutrient,amount,units` rows. An entry
/// may appear with an empty nutrient to register it without measurements.
pub fn read_entries(input: impl Read) -> Result<Vec<DbEntry>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut order: Vec<String> = Vec::new();
    let mut entries: BTreeMap<String, DbEntry> = BTreeMap::new();
    for (i, row) in reader.deserialize::<LongRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            path: "entries".into(),
            line,
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Parse {
            path: "entries".into(),
            line,
            message,
        };
        let entry = entries.entry(row.entry_id.clone()).or_insert_with(|| {
            order.push(row.entry_id.clone());
            DbEntry::new(&row.entry_id, &row.description)
        });
        if entry.description != row.description {
            return Err(bad(format!("entry {} has two descriptions", row.entry_id)));
        }
        if row.nutrient.is_empty() {
            continue;
        }
        let amount = row.amount.ok_or_else(|| bad(format!("{}: missing amount", row.nutrient)))?;
        if !amount.is_finite() || amount < 0.0 {
            return Err(bad(format!("{}: amount must be finite and non-negative", row.nutrient)));
        }
        let previous = entry.values.insert(
            row.nutrient.clone(),
            Measurement {
                amount,
                units: row.units,
            },
        );
        if previous.is_some() {
            return Err(bad(format!("entry {} lists {} twice", row.entry_id, row.nutrient)));
        }
    }
    Ok(order.into_iter().map(|id| entries.remove(&id).expect("registered")).collect())
}

pub fn load_entries(path: impl AsRef<Path>) -> Result<Vec<DbEntry>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_entries(file).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        },
        other => other,
    })
}

pub fn write_entries(entries: &[DbEntry], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in entries {
        if e.values.is_empty() {
            w.serialize(LongRow {
                entry_id: e.entry_id.clone(),
                description: e.description.clone(),
                nutrient: String::new(),
                amount: None,
                units: String::new(),
            })?;
        }
        for (nutrient, m) in &e.values {
            w.serialize(LongRow {
                entry_id: e.entry_id.clone(),
                description: e.description.clone(),
                nutrient: nutrient.clone(),
                amount: Some(m.amount),
                units: m.units.clone(),
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_long_form() {
        let text = "entry_id,description,nutrient,amount,units\n\
                    1,\"Spices, cumin seed\",iron,66.36,mg\n\
                    1,\"Spices, cumin seed\",sugar,2.25,g\n\
                    2,\"Salt, table\",,,\n";
        let entries = read_entries(text.as_bytes()).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].values["iron"].amount, 66.36);
        assert!(entries[1].values.is_empty());
        let mut out = Vec::new();
        write_entries(&entries, &mut out).unwrap();
        assert_eq!(read_entries(out.as_slice()).unwrap(), entries);
    }

    #[test]
    fn rejects_negative_amount() {
        let text = "entry_id,description,nutrient,amount,units\n1,x,iron,-1,mg\n";
        let err = read_entries(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn rejects_conflicting_description() {
        let text = "entry_id,description,nutrient,amount,units\n1,x,iron,1,mg\n1,y,zinc,1,mg\n";
        assert!(read_entries(text.as_bytes()).is_err());
    }
}
