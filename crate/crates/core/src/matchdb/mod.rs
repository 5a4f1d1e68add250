//! Matching entity names to external database rows in three layers (rule
//! scoring over an inverted index, text-vector similarity, and structured
//! chat validation), and joining measured values back onto the names.

mod entry;
mod index;
mod layers;
mod rule;
mod table;
pub mod text;

pub use entry::{load_entries, read_entries, write_entries, DbEntry, Measurement};
pub use index::{build_index, IndexedEntry, MatchIndex};
pub use layers::{
    embed_match, llm_validate, EMBED_BATCH, validation_prompt, validation_schema, EntryVectors, Validation, EMBED_THRESHOLD,
    EMBED_TOP, NO_MATCH,
};
pub use rule::{
    alternates_from_map, rule_match, Alternates, Layer, MatchCandidate, RuleTier, CONSOLIDATION_SCORE,
    CONTAINMENT_MAX, EXACT_SCORE, OVERLAP_MAX, PROCESSED_SCORE, STEMMED_SCORE,
};
pub use table::{join_measurements, MatchConfig, MatchRow, MatchTable, Matcher, Measure};
pub use text::{Synonyms, Vocabulary};
