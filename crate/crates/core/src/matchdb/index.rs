use std::collections::{BTreeMap, BTreeSet};

use super::text::{normalize, segments, stem, stem_phrase, words, Vocabulary};
use super::DbEntry;

/// Pre-normalized forms of one entry's description.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedEntry {
    pub entry_id: String,
    pub description: String,
    pub normalized: String,
    pub segments: Vec<String>,
    /// Segments and the flattened description with processing words removed.
    pub processed: Vec<String>,
    pub stemmed: Vec<String>,
    /// Stems of the non-processing words.
    pub word_stems: BTreeSet<String>,
    pub prep_rank: u32,
}

/// Inverted index from normalized keys to entry positions.
#[derive(Debug, Clone)]
pub struct MatchIndex {
    pub entries: Vec<IndexedEntry>,
    pub keys: BTreeMap<String, BTreeSet<usize>>,
    pub vocabulary: Vocabulary,
    pub warnings: Vec<String>,
}

impl MatchIndex {
    /// Entry positions stored under `key`.
    pub fn lookup(&self, key: &str) -> Vec<usize> {
        self.keys.get(key).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }

    /// Entry ids stored under `key`.
    pub fn ids(&self, key: &str) -> Vec<&str> {
        self.lookup(key).into_iter().map(|i| self.entries[i].entry_id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Indexes each description under its full normalized form, its comma
/// segments, its words, and the stems of all of these.
pub fn build_index(entries: &[DbEntry], vocabulary: Vocabulary) -> MatchIndex {
    let mut warnings = Vec::new();
    if entries.is_empty() {
        warnings.push("no database entries to index".to_string());
    }
    let mut indexed = Vec::with_capacity(entries.len());
    let mut keys: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for e in entries {
        let normalized = normalize(&e.description);
        if normalized.is_empty() {
            warnings.push(format!("entry {} has an empty description; skipped", e.entry_id));
            continue;
        }
        let pos = indexed.len();
        let segs = segments(&e.description);
        let flat = words(&e.description).join(" ");
        let mut processed: Vec<String> = segs.iter().map(|s| vocabulary.strip_processing(s)).collect();
        processed.push(vocabulary.strip_processing(&flat));
        processed.dedup();
        let stemmed = processed.iter().map(|p| stem_phrase(p)).collect();
        let word_stems = words(&vocabulary.strip_processing(&flat)).iter().map(|w| stem(w)).collect();

        let mut add = |k: String| {
            keys.entry(k).or_default().insert(pos);
        };
        add(normalized.clone());
        for s in &segs {
            add(s.clone());
            add(stem_phrase(s));
        }
        for w in words(&e.description) {
            add(stem(&w));
            add(w);
        }
        indexed.push(IndexedEntry {
            entry_id: e.entry_id.clone(),
            description: e.description.clone(),
            prep_rank: vocabulary.prep_rank(&e.description),
            normalized,
            segments: segs,
            processed,
            stemmed,
            word_stems,
        });
    }
    MatchIndex {
        entries: indexed,
        keys,
        vocabulary,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumin_keys() {
        let idx = build_index(&[DbEntry::new("2014", "Spices, cumin seed")], Vocabulary::builtin());
        for key in ["spices, cumin seed", "spices", "cumin seed", "cumin", "seed", "spice"] {
            assert_eq!(idx.ids(key), vec!["2014"], "{key}");
        }
    }

    #[test]
    fn empty_input_warns() {
        let idx = build_index(&[], Vocabulary::builtin());
        assert!(idx.is_empty());
        assert_eq!(idx.warnings.len(), 1);
    }

    #[test]
    fn duplicate_descriptions_keep_both() {
        let idx = build_index(
            &[DbEntry::new("a", "Tomatoes, raw"), DbEntry::new("b", "Tomatoes, raw")],
            Vocabulary::builtin(),
        );
        assert_eq!(idx.ids("tomato"), vec!["a", "b"]);
    }

    #[test]
    fn blank_description_skipped() {
        let idx = build_index(&[DbEntry::new("a", " , "), DbEntry::new("b", "Salt")], Vocabulary::builtin());
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.warnings.len(), 1);
    }
}
