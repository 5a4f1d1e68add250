//! Batched structured classification of entity names against a dimension
//! schema, with per-record validation and retry until every name is tagged.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{LabelKind, LabelSet, LabelValue};
use crate::error::{Error, Result};
use crate::provider::{Cassette, ChatClient, ChatRequest};

pub const BATCH_PLACEHOLDER: &str = "{batch}";

const BUILTIN: [(&str, &str); 5] = [
    ("ground_truth", include_str!("../data/schemas/ground_truth.json")),
    ("taste", include_str!("../data/schemas/taste.json")),
    ("texture", include_str!("../data/schemas/texture.json")),
    ("binary", include_str!("../data/schemas/binary.json")),
    ("cuisine", include_str!("../data/schemas/cuisine.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldKind {
    /// One value from `values`; entries of `missing` mean "no label".
    Enum {
        values: Vec<String>,
        #[serde(default)]
        ordinal: bool,
        #[serde(default)]
        missing: Vec<String>,
    },
    Integer {
        #[serde(default)]
        min: Option<i64>,
        #[serde(default)]
        max: Option<i64>,
        #[serde(default)]
        units: Option<String>,
    },
    /// `yes` / `no`, case-insensitive, or a JSON boolean.
    Binary,
    /// A possibly empty list of distinct values.
    EnumList { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FieldKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSchema {
    pub family: String,
    pub batch_size: usize,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_output_tokens: Option<u32>,
    #[serde(default)]
    pub model: Option<String>,
    pub prompt: String,
    pub fields: Vec<FieldSpec>,
}

impl DimensionSchema {
    pub fn builtin_families() -> Vec<&'static str> {
        BUILTIN.iter().map(|(n, _)| *n).collect()
    }

    /// A shipped schema by family name.
    pub fn builtin(family: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(n, _)| *n == family)
            .ok_or_else(|| Error::invalid(format!("no built-in schema {family:?}")))?;
        Self::from_json_str(text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let schema: Self = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Error::Format(format!("schema {}: {m}", self.family));
        if self.batch_size == 0 {
            return Err(bad("batch size must be positive".into()));
        }
        if !self.prompt.contains(BATCH_PLACEHOLDER) {
            return Err(bad(format!("prompt lacks the {BATCH_PLACEHOLDER} placeholder")));
        }
        if self.fields.is_empty() {
            return Err(bad("no fields".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for f in &self.fields {
            if !names.insert(&f.name) {
                return Err(bad(format!("field {} repeated", f.name)));
            }
            let values = match &f.kind {
                FieldKind::Enum { values, missing, .. } => {
                    if let Some(m) = missing.iter().find(|m| !values.contains(m)) {
                        return Err(bad(format!("{}: missing marker {m:?} is not a value", f.name)));
                    }
                    values
                }
                FieldKind::EnumList { values } => values,
                FieldKind::Integer { min, max, .. } => {
                    if let (Some(lo), Some(hi)) = (min, max) {
                        if lo > hi {
                            return Err(bad(format!("{}: min exceeds max", f.name)));
                        }
                    }
                    continue;
                }
                FieldKind::Binary => continue,
            };
            if values.is_empty() {
                return Err(bad(format!("{}: empty value domain", f.name)));
            }
            let unique: std::collections::BTreeSet<&String> = values.iter().collect();
            if unique.len() != values.len() {
                return Err(bad(format!("{}: enum values must be unique", f.name)));
            }
        }
        Ok(())
    }

    /// JSON Schema for the reply: an array of objects, one per name.
    pub fn response_schema(&self) -> Value {
        let mut properties = serde_json::Map::new();
        properties.insert("ingredient".into(), json!({"type": "string"}));
        for f in &self.fields {
            let prop = match &f.kind {
                FieldKind::Enum { values, .. } => json!({"type": "string", "enum": values}),
                FieldKind::Integer { min, max, .. } => {
                    let mut p = json!({"type": "integer"});
                    if let Some(lo) = min {
                        p["minimum"] = json!(lo);
                    }
                    if let Some(hi) = max {
                        p["maximum"] = json!(hi);
                    }
                    p
                }
                FieldKind::Binary => json!({"type": "string", "enum": ["yes", "no"]}),
                FieldKind::EnumList { values } => {
                    json!({"type": "array", "items": {"type": "string", "enum": values}})
                }
            };
            properties.insert(f.name.clone(), prop);
        }
        let required: Vec<&str> = self.fields.iter().map(|f| f.name.as_str()).collect();
        json!({
            "type": "array",
            "items": {"type": "object", "properties": properties, "required": required}
        })
    }

    /// The prompt with the numbered batch substituted.
    pub fn render(&self, batch: &[String]) -> String {
        let list = batch
            .iter()
            .enumerate()
            .map(|(i, n)| format!("{}. {n}", i + 1))
            .collect::<Vec<_>>()
            .join("\n");
        self.prompt.replace(BATCH_PLACEHOLDER, &list)
    }

    pub fn request(&self, batch: &[String]) -> ChatRequest {
        ChatRequest {
            subject: format!("{} batch starting at {}", self.family, batch.first().map_or("", String::as_str)),
            prompt: self.render(batch),
            schema: self.response_schema(),
        }
    }

    /// Empty label sets, one per field, in schema order.
    pub fn empty_label_sets(&self) -> Vec<LabelSet> {
        self.fields
            .iter()
            .map(|f| match &f.kind {
                FieldKind::Enum {
                    values,
                    ordinal: true,
                    missing,
                } => {
                    let scale: Vec<&str> =
                        values.iter().filter(|v| !missing.contains(v)).map(String::as_str).collect();
                    LabelSet::ordinal(&f.name, &scale)
                }
                FieldKind::Enum { ordinal: false, .. } => LabelSet::new(&f.name, LabelKind::Categorical),
                FieldKind::Integer { units, .. } => {
                    let set = LabelSet::new(&f.name, LabelKind::Numeric);
                    match units {
                        Some(u) => set.with_units(u),
                        None => set,
                    }
                }
                FieldKind::Binary => LabelSet::new(&f.name, LabelKind::Binary),
                FieldKind::EnumList { .. } => LabelSet::new(&f.name, LabelKind::Tags),
            })
            .collect()
    }
}

impl FieldSpec {
    /// Checks one raw value; `Ok(None)` is a legal "no label" marker.
    pub fn parse(&self, raw: &Value) -> std::result::Result<Option<LabelValue>, String> {
        match &self.kind {
            FieldKind::Enum { values, missing, .. } => {
                let s = match raw {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    _ => return Err(format!("{}: expected a string, got {raw}", self.name)),
                };
                if !values.contains(&s) {
                    return Err(format!("{}: {s:?} is not one of {values:?}", self.name));
                }
                Ok((!missing.contains(&s)).then_some(LabelValue::Level(s)))
            }
            FieldKind::Integer { min, max, .. } => {
                let n = match raw {
                    Value::Number(n) => n.as_i64().or_else(|| {
                        n.as_f64().filter(|x| x.fract() == 0.0 && x.abs() < 9.0e15).map(|x| x as i64)
                    }),
                    Value::String(s) => s.trim().parse::<i64>().ok(),
                    _ => None,
                }
                .ok_or_else(|| format!("{}: expected an integer, got {raw}", self.name))?;
                if min.is_some_and(|lo| n < lo) || max.is_some_and(|hi| n > hi) {
                    return Err(format!("{}: {n} outside [{min:?}, {max:?}]", self.name));
                }
                Ok(Some(LabelValue::Number(n as f64)))
            }
            FieldKind::Binary => match raw {
                Value::Bool(b) => Ok(Some(LabelValue::Flag(*b))),
                Value::String(s) if s.eq_ignore_ascii_case("yes") => Ok(Some(LabelValue::Flag(true))),
                Value::String(s) if s.eq_ignore_ascii_case("no") => Ok(Some(LabelValue::Flag(false))),
                _ => Err(format!("{}: expected yes or no, got {raw}", self.name)),
            },
            FieldKind::EnumList { values } => {
                let items = raw.as_array().ok_or_else(|| format!("{}: expected a list, got {raw}", self.name))?;
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    let s = item.as_str().ok_or_else(|| format!("{}: list item {item} is not a string", self.name))?;
                    if !values.iter().any(|v| v == s) {
                        return Err(format!("{}: {s:?} is not one of {values:?}", self.name));
                    }
                    out.push(s.to_string());
                }
                out.sort();
                out.dedup();
                Ok(Some(LabelValue::Set(out)))
            }
        }
    }
}

/// One validated record: a value (or `None` for "no label") per field.
#[derive(Debug, Clone, PartialEq)]
pub struct TagRecord {
    pub ingredient: String,
    pub values: Vec<Option<LabelValue>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub ingredient: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub records: Vec<TagRecord>,
    pub rejects: Vec<Reject>,
    /// Content hash of the request, matching the transcript store key.
    pub transcript: String,
}

fn validate_record(schema: &DimensionSchema, name: &str, raw: &Value) -> std::result::Result<TagRecord, String> {
    let obj = raw.as_object().ok_or_else(|| format!("record is not an object: {raw}"))?;
    if let Some(echo) = obj.get("ingredient").and_then(Value::as_str) {
        if echo.trim() != name {
            return Err(format!("record echoes {echo:?} in the slot for {name:?}"));
        }
    }
    let mut values = Vec::with_capacity(schema.fields.len());
    for f in &schema.fields {
        let v = obj.get(&f.name).ok_or_else(|| format!("{}: missing", f.name))?;
        values.push(f.parse(v)?);
    }
    Ok(TagRecord {
        ingredient: name.to_string(),
        values,
    })
}

/// Sends one batch and validates the reply record by record.
///
/// Records align with `batch` by position. A reply array of the wrong length
/// rejects the whole batch.
pub fn tag_batch(batch: &[String], schema: &DimensionSchema, client: &dyn ChatClient) -> Result<BatchOutcome> {
    if batch.len() > schema.batch_size {
        return Err(Error::invalid(format!(
            "batch of {} exceeds the schema batch size {}",
            batch.len(),
            schema.batch_size
        )));
    }
    let request = schema.request(batch);
    let transcript = Cassette::key(&json!({"prompt": request.prompt, "schema": request.schema}));
    let mut reply = client.complete(&request)?;
    if let Value::String(text) = &reply {
        reply = serde_json::from_str(text).map_err(|e| Error::Provider {
            subject: request.subject.clone(),
            message: format!("unparseable response: {e}"),
            retryable: true,
        })?;
    }
    let items = reply.as_array().ok_or_else(|| Error::Provider {
        subject: request.subject.clone(),
        message: "response is not a JSON array".into(),
        retryable: true,
    })?;
    let mut records = Vec::new();
    let mut rejects = Vec::new();
    if items.len() != batch.len() {
        let reason = format!("response has {} records for {} names", items.len(), batch.len());
        rejects.extend(batch.iter().map(|n| Reject {
            ingredient: n.clone(),
            reason: reason.clone(),
        }));
    } else {
        for (name, raw) in batch.iter().zip(items) {
            match validate_record(schema, name, raw) {
                Ok(r) => records.push(r),
                Err(reason) => rejects.push(Reject {
                    ingredient: name.clone(),
                    reason,
                }),
            }
        }
    }
    Ok(BatchOutcome {
        records,
        rejects,
        transcript,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagRun {
    pub family: String,
    pub requested: Vec<String>,
    pub records: BTreeMap<String, TagRecord>,
    pub attempts: BTreeMap<String, usize>,
    pub rounds: usize,
    pub transcripts: Vec<String>,
    pub rejects: Vec<Reject>,
}

impl TagRun {
    pub fn residual(&self) -> Vec<String> {
        self.requested.iter().filter(|n| !self.records.contains_key(*n)).cloned().collect()
    }

    /// One label set per schema field, in schema order.
    pub fn label_sets(&self, schema: &DimensionSchema) -> Result<Vec<LabelSet>> {
        let mut sets = schema.empty_label_sets();
        for record in self.records.values() {
            for (set, value) in sets.iter_mut().zip(&record.values) {
                match value {
                    Some(v) => set.insert(record.ingredient.clone(), v.clone())?,
                    None => set.missing.push(record.ingredient.clone()),
                }
            }
        }
        Ok(sets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverageConfig {
    pub max_rounds: usize,
    pub max_in_flight: usize,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            max_rounds: 5,
            max_in_flight: 4,
        }
    }
}

/// Tags in rounds, re-submitting whatever is still untagged, until every
/// name has a valid record or `max_rounds` rounds have run.
///
/// Provider failures for a batch leave its names in the residual for the next
/// round. On success the run covers every requested name; otherwise the error
/// lists the residual.
pub fn tag_to_coverage(
    ingredients: &[String],
    schema: &DimensionSchema,
    client: &dyn ChatClient,
    config: CoverageConfig,
) -> Result<TagRun> {
    if config.max_rounds == 0 {
        return Err(Error::invalid("coverage needs at least one round"));
    }
    let mut requested: Vec<String> = Vec::new();
    for n in ingredients {
        if !requested.contains(n) {
            requested.push(n.clone());
        }
    }
    let mut run = TagRun {
        family: schema.family.clone(),
        requested,
        records: BTreeMap::new(),
        attempts: BTreeMap::new(),
        rounds: 0,
        transcripts: Vec::new(),
        rejects: Vec::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.max_in_flight.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    while run.rounds < config.max_rounds {
        let residual = run.residual();
        if residual.is_empty() {
            break;
        }
        run.rounds += 1;
        let batches: Vec<&[String]> = residual.chunks(schema.batch_size).collect();
        let outcomes: Vec<Result<BatchOutcome>> =
            pool.install(|| batches.par_iter().map(|b| tag_batch(b, schema, client)).collect());
        for (batch, outcome) in batches.iter().zip(outcomes) {
            for n in batch.iter() {
                *run.attempts.entry(n.clone()).or_insert(0) += 1;
            }
            match outcome {
                Ok(o) => {
                    run.transcripts.push(o.transcript);
                    run.rejects.extend(o.rejects);
                    for r in o.records {
                        run.records.insert(r.ingredient.clone(), r);
                    }
                }
                Err(e @ Error::Provider { .. }) => run.rejects.extend(batch.iter().map(|n| Reject {
                    ingredient: n.clone(),
                    reason: e.to_string(),
                })),
                Err(e) => return Err(e),
            }
        }
    }
    let residual = run.residual();
    if !residual.is_empty() {
        return Err(Error::Coverage {
            rounds: run.rounds,
            residual,
        });
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;

    /// Answers every batch with conformant umami records, except that names
    /// in `bad` get an illegal level on their first `bad_rounds` calls.
    struct Scripted {
        bad: Vec<String>,
        bad_rounds: usize,
        calls: AtomicUsize,
    }

    impl ChatClient for Scripted {
        fn model(&self) -> &str {
            "scripted"
        }

        fn complete(&self, request: &ChatRequest) -> Result<Value> {
            let call = self.calls.fetch_add(1, Ordering::SeqCst);
            let (_, list) = request.prompt.split_once("INGREDIENTS TO CLASSIFY:").unwrap();
            let names: Vec<String> = list
                .lines()
                .filter_map(|l| l.split_once(". ").filter(|(n, _)| n.parse::<usize>().is_ok()).map(|(_, r)| r.to_string()))
                .collect();
            Ok(Value::Array(
                names
                    .iter()
                    .map(|n| {
                        let level = if self.bad.contains(n) && call < self.bad_rounds { "extreme" } else { "high" };
                        json!({"ingredient": n, "sweet_level": "none", "salty_level": "low",
                               "sour_level": "none", "bitter_level": level})
                    })
                    .collect(),
            ))
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("item{i}")).collect()
    }

    #[test]
    fn builtin_schemas_parse() {
        let field_counts: Vec<usize> = DimensionSchema::builtin_families()
            .iter()
            .map(|f| DimensionSchema::builtin(f).unwrap().fields.len())
            .collect();
        assert_eq!(field_counts, vec![5, 4, 6, 7, 2]);
        let cuisine = DimensionSchema::builtin("cuisine").unwrap();
        assert!(cuisine.prompt.contains("Most ingredients should have ZERO cuisine tags"));
    }

    #[test]
    fn conformant_batch() {
        let schema = DimensionSchema::builtin("taste").unwrap();
        let client = Scripted {
            bad: vec![],
            bad_rounds: 0,
            calls: AtomicUsize::new(0),
        };
        let out = tag_batch(&names(3), &schema, &client).unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out.rejects.is_empty());
    }

    #[test]
    fn illegal_level_rejected_individually() {
        let schema = DimensionSchema::builtin("taste").unwrap();
        let client = Scripted {
            bad: vec!["item1".into()],
            bad_rounds: 1,
            calls: AtomicUsize::new(0),
        };
        let out = tag_batch(&names(3), &schema, &client).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.rejects[0].ingredient, "item1");
    }

    struct Short;

    impl ChatClient for Short {
        fn model(&self) -> &str {
            "short"
        }

        fn complete(&self, _: &ChatRequest) -> Result<Value> {
            Ok(json!([{}, {}]))
        }
    }

    #[test]
    fn length_mismatch_rejects_batch() {
        let schema = DimensionSchema::builtin("taste").unwrap();
        let out = tag_batch(&names(3), &schema, &Short).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.rejects.len(), 3);
    }

    #[test]
    fn retry_reaches_coverage() {
        let schema = DimensionSchema::builtin("taste").unwrap().with_batch_size(2);
        let client = Scripted {
            bad: vec!["item3".into()],
            bad_rounds: 3,
            calls: AtomicUsize::new(0),
        };
        let config = CoverageConfig {
            max_rounds: 3,
            max_in_flight: 1,
        };
        let run = tag_to_coverage(&names(5), &schema, &client, config).unwrap();
        assert_eq!(run.rounds, 2);
        assert_eq!(run.attempts["item3"], 2);
        let sets = run.label_sets(&schema).unwrap();
        assert_eq!(sets.len(), 4);
        assert!(sets.iter().all(|s| s.len() == 5));
    }

    #[test]
    fn permanent_failure_lists_residual() {
        let schema = DimensionSchema::builtin("taste").unwrap();
        let client = Scripted {
            bad: vec!["item2".into()],
            bad_rounds: usize::MAX,
            calls: AtomicUsize::new(0),
        };
        let config = CoverageConfig {
            max_rounds: 2,
            max_in_flight: 1,
        };
        match tag_to_coverage(&names(4), &schema, &client, config) {
            Err(Error::Coverage { rounds, residual }) => {
                assert_eq!(rounds, 2);
                assert_eq!(residual, vec!["item2".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_input_gives_empty_sets() {
        let schema = DimensionSchema::builtin("ground_truth").unwrap();
        let run = tag_to_coverage(&[], &schema, &Short, CoverageConfig::default()).unwrap();
        let sets = run.label_sets(&schema).unwrap();
        assert_eq!(sets.len(), 5);
        assert!(sets.iter().all(LabelSet::is_empty));
    }

    #[test]
    fn cuisine_values() {
        let schema = DimensionSchema::builtin("cuisine").unwrap();
        let f = &schema.fields[0];
        assert_eq!(f.parse(&json!([])).unwrap(), Some(LabelValue::Set(vec![])));
        assert!(f.parse(&json!(["Klingon"])).is_err());
        let nova = &DimensionSchema::builtin("ground_truth").unwrap().fields[2];
        assert!(nova.parse(&json!("5")).is_err());
        let zone = &DimensionSchema::builtin("ground_truth").unwrap().fields[1];
        assert_eq!(zone.parse(&json!("N/A")).unwrap(), None);
    }
}
