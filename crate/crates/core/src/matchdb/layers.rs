use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::rule::{Layer, MatchCandidate};
use super::DbEntry;
use crate::corpus::{dot, norm};
use crate::error::{Error, Result};
use crate::provider::{ChatClient, ChatRequest, TextEmbedder};

pub const EMBED_TOP: usize = 5;
pub const EMBED_THRESHOLD: f64 = 0.80;
pub const NO_MATCH: &str = "no_match";
/// Descriptions per embedding request when indexing database entries.
pub const EMBED_BATCH: usize = 64;

const DEFAULT_PROMPT: &str = include_str!("../../data/match_prompt.txt");

/// Unit text vectors for every database description.
#[derive(Debug, Clone)]
pub struct EntryVectors {
    ids: Vec<String>,
    descriptions: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

fn unit(v: Vec<f64>, subject: &str) -> Result<Vec<f64>> {
    let n = norm(&v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Provider {
            subject: subject.to_string(),
            message: "provider returned a zero or non-finite vector".into(),
            retryable: false,
        });
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

impl EntryVectors {
    /// Embeds descriptions in batches of `batch` texts.
    pub fn build(entries: &[DbEntry], embedder: &dyn TextEmbedder, batch: usize) -> Result<Self> {
        let descriptions: Vec<String> = entries.iter().map(|e| e.description.clone()).collect();
        let mut vectors = Vec::with_capacity(entries.len());
        for (i, chunk) in descriptions.chunks(batch.max(1)).enumerate() {
            let subject = format!("entry batch {i}");
            for v in embedder.embed(&subject, chunk)? {
                vectors.push(unit(v, &subject)?);
            }
        }
        Ok(Self {
            ids: entries.iter().map(|e| e.entry_id.clone()).collect(),
            descriptions,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Up to five entries whose description vectors reach cosine 0.80 with the
/// name's vector, best first; ties keep entry order.
pub fn embed_match(name: &str, embedder: &dyn TextEmbedder, entries: &EntryVectors) -> Result<Vec<MatchCandidate>> {
    let query = embedder.embed(name, &[name.to_string()])?;
    let query = unit(
        query.into_iter().next().ok_or_else(|| Error::Provider {
            subject: name.to_string(),
            message: "provider returned no vector".into(),
            retryable: false,
        })?,
        name,
    )?;
    if query.len() != entries.vectors.first().map_or(query.len(), Vec::len) {
        return Err(Error::DimensionMismatch {
            expected: entries.vectors[0].len(),
            actual: query.len(),
        });
    }
    let mut scored: Vec<(usize, f64)> = entries
        .vectors
        .iter()
        .enumerate()
        .map(|(i, v)| (i, dot(&query, v).clamp(-1.0, 1.0)))
        .filter(|&(_, s)| s >= EMBED_THRESHOLD)
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(EMBED_TOP);
    Ok(scored
        .into_iter()
        .map(|(i, s)| MatchCandidate {
            entry_id: entries.ids[i].clone(),
            description: entries.descriptions[i].clone(),
            score: s,
            layer: Layer::Embed,
            tier: None,
            prep_rank: 0,
            rationale: format!("text-vector cosine {s:.4}"),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub entry_id: Option<String>,
    pub response: String,
    pub reasoning: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn validation_schema() -> Value {
    json!({
        "type": "object",
        "properties": {
            "best_match": {"type": "string"},
            "reasoning": {"type": "string"}
        },
        "required": ["best_match", "reasoning"]
    })
}

/// Fills the validation prompt template (`{ingredient}`, `{candidates}`).
pub fn validation_prompt(template: Option<&str>, name: &str, candidates: &[MatchCandidate]) -> String {
    let list = candidates
        .iter()
        .map(|c| format!("\"{}\"", c.description))
        .collect::<Vec<_>>()
        .join(", ");
    template
        .unwrap_or(DEFAULT_PROMPT)
        .replace("{ingredient}", name)
        .replace("{candidates}", &list)
}

/// Asks the client to pick one candidate. Only a verbatim echo of a
/// candidate description is accepted; anything else leaves the name
/// unmatched, with a warning unless the reply was `no_match`.
pub fn llm_validate(
    name: &str,
    candidates: &[MatchCandidate],
    client: &dyn ChatClient,
    template: Option<&str>,
) -> Result<Validation> {
    if candidates.is_empty() {
        return Err(Error::invalid(format!("{name}: validation needs at least one candidate")));
    }
    let request = ChatRequest {
        subject: name.to_string(),
        prompt: validation_prompt(template, name, candidates),
        schema: validation_schema(),
    };
    let reply = client.complete(&request)?;
    let response = reply.get("best_match").and_then(Value::as_str);
    let reasoning = reply.get("reasoning").and_then(Value::as_str).unwrap_or_default().to_string();
    let Some(response) = response else {
        return Ok(Validation {
            entry_id: None,
            response: reply.to_string(),
            reasoning,
            warning: Some(format!("{name}: reply lacks a string `best_match`")),
        });
    };
    let trimmed = response.trim();
    if trimmed == NO_MATCH {
        return Ok(Validation {
            entry_id: None,
            response: response.to_string(),
            reasoning,
            warning: None,
        });
    }
    match candidates.iter().find(|c| c.description == trimmed) {
        Some(c) => Ok(Validation {
            entry_id: Some(c.entry_id.clone()),
            response: response.to_string(),
            reasoning,
            warning: None,
        }),
        None => Ok(Validation {
            entry_id: None,
            response: response.to_string(),
            reasoning,
            warning: Some(format!("{name}: reply {response:?} is not one of the candidates")),
        }),
    }
}
