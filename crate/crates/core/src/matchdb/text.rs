//! Normalization, stemming and the editable word lists used by the rule layer.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_SYNONYMS: &str = include_str!("../../data/synonyms.tsv");
const DEFAULT_PROCESSING: &str = include_str!("../../data/processing_words.txt");
const DEFAULT_PREP_RANKS: &str = include_str!("../../data/prep_ranks.tsv");

/// Rank given to entries whose description names no listed preparation state.
pub const UNKNOWN_PREP_RANK: u32 = 24;

/// Lowercases, turns underscores and punctuation other than commas into
/// spaces, and collapses whitespace inside each comma segment.
pub fn normalize(text: &str) -> String {
    segments(text).join(", ")
}

/// Comma-separated segments of a description, each normalized.
pub fn segments(text: &str) -> Vec<String> {
    text.split(',')
        .map(|seg| words(seg).join(" "))
        .filter(|s| !s.is_empty())
        .collect()
}

/// Lowercase alphanumeric words; apostrophes are dropped, hyphens kept.
pub fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .replace('\'', "")
        .split(|c: char| !(c.is_alphanumeric() || c == '-'))
        .map(|w| w.trim_matches('-'))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Light suffix stripping: plural `s`/`es`/`ies` and trailing `ed`/`ing`.
pub fn stem(word: &str) -> String {
    let w = word;
    let n = w.len();
    if n > 4 && w.ends_with("ies") {
        return format!("{}y", &w[..n - 3]);
    }
    if n > 4 && w.ends_with("oes") {
        return w[..n - 2].to_string();
    }
    if n > 4 && ["ches", "shes", "sses", "xes", "zes"].iter().any(|s| w.ends_with(s)) {
        return w[..n - 2].to_string();
    }
    if n > 5 && w.ends_with("ing") {
        return w[..n - 3].to_string();
    }
    if n > 4 && w.ends_with("ed") && !w.ends_with("eed") {
        return w[..n - 2].to_string();
    }
    if n > 3 && w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") {
        return w[..n - 1].to_string();
    }
    w.to_string()
}

pub fn stem_phrase(phrase: &str) -> String {
    phrase.split(' ').map(stem).collect::<Vec<_>>().join(" ")
}

/// Whole-name and single-word replacements applied before lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Synonyms {
    map: BTreeMap<String, String>,
}

impl Synonyms {
    /// The shipped table.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_SYNONYMS).expect("shipped synonym table parses")
    }

    /// Tab-separated `name<TAB>replacement` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (from, to) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: "synonyms".into(),
                line: i + 1,
                message: "expected name<TAB>replacement".into(),
            })?;
            map.insert(normalize(from), normalize(to));
        }
        Ok(Self { map })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Replaces the whole name when listed, otherwise each listed word.
    pub fn apply(&self, name: &str) -> String {
        let name = normalize(name);
        if let Some(to) = self.map.get(&name) {
            return to.clone();
        }
        name.split(' ')
            .map(|w| self.map.get(w).map_or(w, String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Processing words and the preparation-state preference order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub processing: BTreeSet<String>,
    pub prep_ranks: BTreeMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Vocabulary {
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_PROCESSING, DEFAULT_PREP_RANKS).expect("shipped vocabulary parses")
    }

    pub fn parse(processing: &str, prep_ranks: &str) -> Result<Self> {
        let processing = processing
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        let mut ranks = BTreeMap::new();
        for (i, line) in prep_ranks.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: &str| Error::Parse {
                path: "prep_ranks".into(),
                line: i + 1,
                message: message.into(),
            };
            let (state, rank) = line.split_once('\t').ok_or_else(|| bad("expected state<TAB>rank"))?;
            let rank: u32 = rank.trim().parse().map_err(|_| bad("rank is not an integer"))?;
            if rank >= UNKNOWN_PREP_RANK {
                return Err(bad("rank must sort before unlisted states"));
            }
            ranks.insert(state.trim().to_lowercase(), rank);
        }
        Ok(Self {
            processing,
            prep_ranks: ranks,
        })
    }

    /// Drops processing words; a phrase made only of them is kept unchanged.
    pub fn strip_processing(&self, phrase: &str) -> String {
        let kept: Vec<&str> = phrase.split(' ').filter(|w| !self.processing.contains(*w)).collect();
        if kept.is_empty() {
            phrase.to_string()
        } else {
            kept.join(" ")
        }
    }

    /// Best (lowest) rank among the preparation states a description names.
    pub fn prep_rank(&self, description: &str) -> u32 {
        words(description)
            .iter()
            .filter_map(|w| self.prep_ranks.get(w))
            .min()
            .copied()
            .unwrap_or(UNKNOWN_PREP_RANK)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_segments() {
        assert_eq!(segments("Spices, cumin seed"), vec!["spices", "cumin seed"]);
        assert_eq!(normalize("  Tomatoes,  RAW "), "tomatoes, raw");
        assert_eq!(normalize("red_bell_pepper"), "red bell pepper");
    }

    #[test]
    fn stems_plurals_and_participles() {
        assert_eq!(stem("tomatoes"), "tomato");
        assert_eq!(stem("berries"), "berry");
        assert_eq!(stem("seeds"), "seed");
        assert_eq!(stem("peaches"), "peach");
        assert_eq!(stem("smoked"), "smok");
        assert_eq!(stem("glass"), "glass");
        assert_eq!(stem("asparagus"), "asparagus");
        assert_eq!(stem("pudding"), "pudd");
    }

    #[test]
    fn builtin_synonyms() {
        let s = Synonyms::builtin();
        assert!(s.len() >= 55);
        assert_eq!(s.apply("courgette"), "zucchini");
        assert_eq!(s.apply("Blue cheese"), "cheese, blue");
        assert_eq!(s.apply("grilled aubergine"), "grilled eggplant");
    }

    #[test]
    fn prep_ranks_order() {
        let v = Vocabulary::builtin();
        assert!(v.prep_rank("Tomatoes, raw") < v.prep_rank("Tomatoes, canned"));
        assert!(v.prep_rank("Spices, cumin seed, ground") < v.prep_rank("Beef, cooked"));
        assert!(v.prep_rank("Beans, frozen") < v.prep_rank("Salt, table"));
        assert_eq!(v.prep_rank("Salt, table"), UNKNOWN_PREP_RANK);
        assert_eq!(v.strip_processing("dried oregano"), "oregano");
        assert_eq!(v.strip_processing("raw"), "raw");
    }
}
