use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::index::{IndexedEntry, MatchIndex};
use super::text::{normalize, stem, stem_phrase, words, Synonyms};
use crate::curation::ConsolidationMap;

pub const EXACT_SCORE: f64 = 1000.0;
pub const PROCESSED_SCORE: f64 = 900.0;
pub const STEMMED_SCORE: f64 = 800.0;
pub const CONSOLIDATION_SCORE: f64 = 700.0;
pub const CONTAINMENT_MAX: f64 = 600.0;
pub const OVERLAP_MAX: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Rule,
    Embed,
    Llm,
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Layer::Rule => "rule",
            Layer::Embed => "embed",
            Layer::Llm => "llm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleTier {
    Exact,
    Processed,
    Stemmed,
    Consolidation,
    Containment,
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub entry_id: String,
    pub description: String,
    pub score: f64,
    pub layer: Layer,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tier: Option<RuleTier>,
    /// Preparation-state rank; lower wins among equal scores.
    pub prep_rank: u32,
    pub rationale: String,
}

/// Other names known for each canonical name, from a consolidation map.
pub type Alternates = BTreeMap<String, Vec<String>>;

/// Maps each canonical name to the original names consolidated into it.
pub fn alternates_from_map(map: &ConsolidationMap) -> Alternates {
    let mut out: Alternates = BTreeMap::new();
    for entry in map.entries().values() {
        let Some(cid) = entry.canonical_id else { continue };
        let Some(canonical) = map.canonical(cid) else { continue };
        let (canon, original) = (normalize(&canonical.name), normalize(&entry.original_name));
        if canon != original {
            out.entry(canon).or_default().push(original);
        }
    }
    for names in out.values_mut() {
        names.sort();
        names.dedup();
    }
    out
}

/// Query forms derived once per name.
struct Query {
    normalized: String,
    processed: String,
    stemmed: String,
    word_stems: BTreeSet<String>,
}

impl Query {
    fn new(name: &str, index: &MatchIndex) -> Self {
        let normalized = normalize(name);
        let flat = words(&normalized).join(" ");
        let processed = index.vocabulary.strip_processing(&flat);
        Self {
            stemmed: stem_phrase(&processed),
            word_stems: words(&processed).iter().map(|w| stem(w)).collect(),
            normalized,
            processed,
        }
    }

    /// Exact, processed or stemmed equality against `e`.
    fn direct(&self, e: &IndexedEntry) -> Option<(RuleTier, f64, String)> {
        if self.normalized == e.normalized || e.segments.contains(&self.normalized) {
            return Some((RuleTier::Exact, EXACT_SCORE, format!("exact: {:?}", self.normalized)));
        }
        if e.processed.contains(&self.processed) {
            return Some((
                RuleTier::Processed,
                PROCESSED_SCORE,
                format!("equal after removing processing words: {:?}", self.processed),
            ));
        }
        if e.stemmed.contains(&self.stemmed) {
            return Some((RuleTier::Stemmed, STEMMED_SCORE, format!("stemmed: {:?}", self.stemmed)));
        }
        None
    }
}

fn containment(q: &Query, e: &IndexedEntry) -> Option<(f64, String)> {
    let padded_q = format!(" {} ", q.processed);
    let mut best: Option<(f64, String)> = None;
    for form in &e.processed {
        let padded_f = format!(" {form} ");
        let (short, long) = if form.len() <= q.processed.len() { (form, &q.processed) } else { (&q.processed, form) };
        let contained = if form.len() <= q.processed.len() {
            padded_q.contains(&padded_f)
        } else {
            padded_f.contains(&padded_q)
        };
        if !contained || short == long {
            continue;
        }
        let score = CONTAINMENT_MAX * short.chars().count() as f64 / long.chars().count() as f64;
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            let why = format!("containment: {short:?} in {long:?} (600 x {}/{})", short.chars().count(), long.chars().count());
            best = Some((score, why));
        }
    }
    best
}

fn overlap(q: &Query, e: &IndexedEntry) -> Option<(f64, String)> {
    let shared = q.word_stems.intersection(&e.word_stems).count();
    if shared == 0 {
        return None;
    }
    let union = q.word_stems.union(&e.word_stems).count();
    let jaccard = shared as f64 / union as f64;
    Some((OVERLAP_MAX * jaccard, format!("word overlap: jaccard {shared}/{union}")))
}

/// Scores every entry retrievable from the index for `name` with the six rule
/// tiers and returns candidates best first.
///
/// Synonyms are applied before lookup. `alternates`, when given, supplies
/// consolidation-map variants of the name for the 700 tier. Equal scores are
/// ordered by preparation rank, then by index position.
pub fn rule_match(
    name: &str,
    index: &MatchIndex,
    synonyms: &Synonyms,
    alternates: Option<&Alternates>,
) -> Vec<MatchCandidate> {
    let query = Query::new(&synonyms.apply(name), index);
    let variants: Vec<Query> = alternates
        .and_then(|a| a.get(&normalize(name)))
        .map(|names| names.iter().map(|n| Query::new(&synonyms.apply(n), index)).collect())
        .unwrap_or_default();

    let mut pool: BTreeSet<usize> = BTreeSet::new();
    for q in std::iter::once(&query).chain(&variants) {
        pool.extend(index.lookup(&q.normalized));
        for w in words(&q.normalized) {
            pool.extend(index.lookup(&w));
            pool.extend(index.lookup(&stem(&w)));
        }
    }

    let mut out: Vec<(usize, MatchCandidate)> = Vec::new();
    for pos in pool {
        let e = &index.entries[pos];
        let scored = query
            .direct(e)
            .or_else(|| {
                variants.iter().find_map(|v| {
                    v.direct(e).map(|(_, _, why)| {
                        (
                            RuleTier::Consolidation,
                            CONSOLIDATION_SCORE,
                            format!("via consolidation variant {:?}; {why}", v.normalized),
                        )
                    })
                })
            })
            .or_else(|| {
                let c = containment(&query, e).map(|(s, w)| (RuleTier::Containment, s, w));
                let o = overlap(&query, e).map(|(s, w)| (RuleTier::Overlap, s, w));
                match (c, o) {
                    (Some(c), Some(o)) => Some(if o.1 > c.1 { o } else { c }),
                    (c, o) => c.or(o),
                }
            });
        if let Some((tier, score, rationale)) = scored {
            if score > 0.0 {
                out.push((
                    pos,
                    MatchCandidate {
                        entry_id: e.entry_id.clone(),
                        description: e.description.clone(),
                        score,
                        layer: Layer::Rule,
                        tier: Some(tier),
                        prep_rank: e.prep_rank,
                        rationale,
                    },
                ));
            }
        }
    }
    out.sort_by(|(pa, a), (pb, b)| {
        b.score
            .total_cmp(&a.score)
            .then(a.prep_rank.cmp(&b.prep_rank))
            .then(pa.cmp(pb))
    });
    out.into_iter().map(|(_, c)| c).collect()
}
