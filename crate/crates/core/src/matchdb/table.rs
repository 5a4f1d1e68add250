use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::{embed_match, llm_validate, EntryVectors};
use super::rule::{rule_match, Alternates, Layer};
use super::{DbEntry, MatchIndex, Synonyms};
use crate::corpus::{LabelKind, LabelSet, LabelValue};
use crate::error::{Error, Result};
use crate::provider::{with_retries, ChatClient, TextEmbedder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Lowest rule score accepted without going to the later layers.
    pub rule_threshold: f64,
    /// Attempts per provider call when the failure is retryable.
    pub attempts: usize,
    /// Names matched concurrently, bounding provider calls in flight.
    pub max_in_flight: usize,
    /// Validation prompt template overriding the shipped one.
    pub prompt: Option<String>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            rule_threshold: 300.0,
            attempts: 3,
            max_in_flight: 4,
            prompt: None,
        }
    }
}

/// Everything the three layers need; the later layers are optional.
pub struct Matcher<'a> {
    pub index: &'a MatchIndex,
    pub synonyms: &'a Synonyms,
    pub alternates: Option<&'a Alternates>,
    pub embedder: Option<(&'a dyn TextEmbedder, &'a EntryVectors)>,
    pub llm: Option<&'a dyn ChatClient>,
    pub config: MatchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub ingredient: String,
    pub entry_id: Option<String>,
    pub layer: Option<Layer>,
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MatchRow {
    fn unmatched(ingredient: &str, warnings: Vec<String>) -> Self {
        Self {
            ingredient: ingredient.to_string(),
            entry_id: None,
            layer: None,
            score: None,
            warnings,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchTable {
    pub rows: Vec<MatchRow>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    ingredient: String,
    entry_id: String,
    layer: String,
    score: String,
}

impl MatchTable {
    pub fn matched(&self) -> usize {
        self.rows.iter().filter(|r| r.entry_id.is_some()).count()
    }

    pub fn match_rate(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.matched() as f64 / self.rows.len() as f64
        }
    }

    pub fn get(&self, ingredient: &str) -> Option<&MatchRow> {
        self.rows.iter().find(|r| r.ingredient == ingredient)
    }

    pub fn by_layer(&self) -> BTreeMap<Layer, usize> {
        let mut out = BTreeMap::new();
        for layer in self.rows.iter().filter_map(|r| r.layer) {
            *out.entry(layer).or_insert(0) += 1;
        }
        out
    }

    /// `ingredient,entry_id,layer,score`; unmatched rows have an empty id and
    /// layer `unmatched`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(CsvRow {
                ingredient: r.ingredient.clone(),
                entry_id: r.entry_id.clone().unwrap_or_default(),
                layer: r.layer.map_or("unmatched".to_string(), |l| l.to_string()),
                score: r.score.map_or(String::new(), |s| format!("{s:.6}")),
            })?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, row) in csv::Reader::from_reader(input).deserialize::<CsvRow>().enumerate() {
            let bad = |message: String| Error::Parse {
                path: "match table".into(),
                line: i + 2,
                message,
            };
            let row = row.map_err(|e| bad(e.to_string()))?;
            let layer = match row.layer.as_str() {
                "rule" => Some(Layer::Rule),
                "embed" => Some(Layer::Embed),
                "llm" => Some(Layer::Llm),
                "unmatched" => None,
                other => return Err(bad(format!("unknown layer {other:?}"))),
            };
            let score = if row.score.is_empty() {
                None
            } else {
                Some(row.score.parse::<f64>().map_err(|e| bad(e.to_string()))?)
            };
            if layer.is_some() == row.entry_id.is_empty() {
                return Err(bad("entry id and layer disagree".into()));
            }
            rows.push(MatchRow {
                ingredient: row.ingredient,
                entry_id: (!row.entry_id.is_empty()).then_some(row.entry_id),
                layer,
                score,
                warnings: Vec::new(),
            });
        }
        Ok(Self { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }
}

impl Matcher<'_> {
    /// Runs the layers in order for one name; a later layer only sees names
    /// the earlier ones left unmatched.
    pub fn match_one(&self, name: &str) -> Result<MatchRow> {
        let rule = rule_match(name, self.index, self.synonyms, self.alternates);
        if let Some(best) = rule.first().filter(|c| c.score >= self.config.rule_threshold) {
            return Ok(MatchRow {
                ingredient: name.to_string(),
                entry_id: Some(best.entry_id.clone()),
                layer: Some(Layer::Rule),
                score: Some(best.score),
                warnings: Vec::new(),
            });
        }
        let Some((embedder, vectors)) = self.embedder else {
            return Ok(MatchRow::unmatched(name, Vec::new()));
        };
        let query = name.replace('_', " ");
        let candidates = with_retries(self.config.attempts, || embed_match(&query, embedder, vectors))?;
        if candidates.is_empty() {
            return Ok(MatchRow::unmatched(name, Vec::new()));
        }
        let Some(llm) = self.llm else {
            return Ok(MatchRow::unmatched(
                name,
                vec![format!("{} embedding candidates left unvalidated", candidates.len())],
            ));
        };
        let verdict = with_retries(self.config.attempts, || {
            llm_validate(&query, &candidates, llm, self.config.prompt.as_deref())
        })?;
        let warnings = verdict.warning.into_iter().collect();
        Ok(match verdict.entry_id {
            Some(id) => {
                let score = candidates.iter().find(|c| c.entry_id == id).map(|c| c.score);
                MatchRow {
                    ingredient: name.to_string(),
                    entry_id: Some(id),
                    layer: Some(Layer::Llm),
                    score,
                    warnings,
                }
            }
            None => MatchRow::unmatched(name, warnings),
        })
    }

    /// Matches every name, at most `max_in_flight` at a time, keeping input
    /// order.
    pub fn match_all(&self, names: &[String]) -> Result<MatchTable> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.max_in_flight.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        let rows = pool.install(|| names.par_iter().map(|n| self.match_one(n)).collect::<Result<Vec<_>>>())?;
        Ok(MatchTable { rows })
    }
}

/// A measured quantity: one nutrient, or the sum of several compounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measure {
    pub name: String,
    pub parts: Vec<String>,
}

impl Measure {
    pub fn single(name: impl Into<String>) -> Self {
        let name = name.into();
        Self {
            parts: vec![name.clone()],
            name,
        }
    }

    /// Composite summed over whichever parts an entry reports.
    pub fn sum(name: impl Into<String>, parts: &[&str]) -> Self {
        Self {
            name: name.into(),
            parts: parts.iter().map(|p| p.to_string()).collect(),
        }
    }
}

/// Numeric labels for matched ingredients from their entries' measurements.
///
/// Ingredients whose entry reports none of the measure's parts are left out.
pub fn join_measurements(table: &MatchTable, entries: &[DbEntry], measure: &Measure) -> Result<LabelSet> {
    let by_id: BTreeMap<&str, &DbEntry> = entries.iter().map(|e| (e.entry_id.as_str(), e)).collect();
    let mut units: Option<String> = None;
    let mut values: Vec<(String, f64)> = Vec::new();
    for row in &table.rows {
        let Some(id) = &row.entry_id else { continue };
        let entry = by_id
            .get(id.as_str())
            .ok_or_else(|| Error::invalid(format!("{}: matched entry {id} is not in the database", row.ingredient)))?;
        let mut total = 0.0;
        let mut found = false;
        for part in &measure.parts {
            let Some(m) = entry.values.get(part) else { continue };
            match &units {
                None => units = Some(m.units.clone()),
                Some(u) if *u != m.units => {
                    return Err(Error::invalid(format!(
                        "{}: {part} is in {} but earlier values are in {u}",
                        measure.name, m.units
                    )))
                }
                Some(_) => {}
            }
            total += m.amount;
            found = true;
        }
        if found {
            values.push((row.ingredient.clone(), total));
        }
    }
    if values.is_empty() {
        return Err(Error::degenerate(format!("{} is absent from every matched entry", measure.name)));
    }
    let mut labels = LabelSet::new(&measure.name, LabelKind::Numeric);
    if let Some(u) = units {
        labels = labels.with_units(u);
    }
    for (name, v) in values {
        labels.insert(name, LabelValue::Number(v))?;
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> MatchTable {
        MatchTable {
            rows: vec![
                MatchRow {
                    ingredient: "apple".into(),
                    entry_id: Some("1".into()),
                    layer: Some(Layer::Rule),
                    score: Some(800.0),
                    warnings: vec![],
                },
                MatchRow::unmatched("gochujang", vec![]),
                MatchRow {
                    ingredient: "honey".into(),
                    entry_id: Some("2".into()),
                    layer: Some(Layer::Llm),
                    score: Some(0.91),
                    warnings: vec![],
                },
            ],
        }
    }

    fn entries() -> Vec<DbEntry> {
        vec![
            DbEntry::new("1", "Apples, raw")
                .with_value("sugar", 4.2, "g/100g")
                .with_value("sucrose", 2.0, "g/100g")
                .with_value("fructose", 5.0, "g/100g")
                .with_value("glucose", 2.5, "g/100g"),
            DbEntry::new("2", "Honey").with_value("fructose", 40.0, "g/100g"),
        ]
    }

    #[test]
    fn passthrough_and_composite() {
        let single = join_measurements(&table(), &entries(), &Measure::single("sugar")).unwrap();
        assert_eq!(single.get("apple"), Some(&LabelValue::Number(4.2)));
        assert_eq!(single.len(), 1);
        assert_eq!(single.units.as_deref(), Some("g/100g"));
        let total = join_measurements(
            &table(),
            &entries(),
            &Measure::sum("total_sugars", &["sucrose", "fructose", "glucose"]),
        )
        .unwrap();
        assert_eq!(total.get("apple"), Some(&LabelValue::Number(9.5)));
        assert_eq!(total.get("honey"), Some(&LabelValue::Number(40.0)));
        assert!(total.get("gochujang").is_none());
    }

    #[test]
    fn absent_nutrient_fails() {
        assert!(join_measurements(&table(), &entries(), &Measure::single("zinc")).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = table();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert!(text.starts_with("ingredient,entry_id,layer,score\n"));
        assert!(text.contains("gochujang,,unmatched,\n"));
        let back = MatchTable::read_csv(out.as_slice()).unwrap();
        assert_eq!(back.rows.len(), 3);
        assert_eq!(back.matched(), 2);
        assert_eq!(back.by_layer()[&Layer::Llm], 1);
    }
}
