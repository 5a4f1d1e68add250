//! Structural properties of the corpus, curation, resampling and tagging code.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use serde_json::{json, Value};

use palate::corpus::{pairwise, Entity, EmbeddingMatrix, LabelValue};
use palate::crossval::fold_assignment;
use palate::culture::lift;
use palate::curation::{consolidate, Canonical, ConsolidationMap, MapEntry};
use palate::provider::{ChatClient, ChatRequest};
use palate::stats::Seed;
use palate::tagger::{tag_batch, DimensionSchema, FieldKind};
use palate::Result;

fn matrix(rows: Vec<Vec<f64>>) -> EmbeddingMatrix {
    let entities = (0..rows.len()).map(|i| Entity::new(i as i64 + 1, format!("e{i}"))).collect();
    EmbeddingMatrix::new(entities, rows).unwrap()
}

fn nonzero_rows(n: std::ops::Range<usize>, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(-5.0f64..5.0, dim).prop_filter("nonzero", |r| r.iter().any(|v| v.abs() > 1e-3)),
        n,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairwise_lists_each_unordered_pair_once(rows in nonzero_rows(2..40, 4)) {
        let n = rows.len();
        let m = matrix(rows);
        let table = pairwise(&m).unwrap();
        prop_assert_eq!(table.len(), n * (n - 1) / 2);
        let mut seen = BTreeSet::new();
        for r in &table.rows {
            prop_assert!(r.id_a < r.id_b);
            prop_assert!(seen.insert((r.id_a, r.id_b)));
            prop_assert!(r.cosine.abs() <= 1.0 + 1e-12);
        }
        let ordered: Vec<_> = table.rows.iter().map(|r| (r.id_a, r.id_b)).collect();
        let mut sorted = ordered.clone();
        sorted.sort();
        prop_assert_eq!(ordered, sorted);
    }

    #[test]
    fn consolidated_rows_are_member_means(
        rows in nonzero_rows(1..30, 5),
        assignment in prop::collection::vec(prop::option::weighted(0.9, 0usize..6), 30),
    ) {
        let m = matrix(rows);
        let mut entries = BTreeMap::new();
        let mut catalog = BTreeMap::new();
        for (i, e) in m.entities().iter().enumerate() {
            let canonical = assignment[i].map(|g| 100 + g as i64);
            if let Some(c) = canonical {
                catalog.insert(c, Canonical::named(format!("group {c}")));
            }
            entries.insert(e.id, MapEntry { original_name: e.name.clone(), canonical_id: canonical });
        }
        let map = ConsolidationMap::new(entries, catalog).unwrap();
        let curated = consolidate(&m, &map).unwrap();
        for (cid, members) in map.groups() {
            let got = curated.vector(cid).unwrap();
            for d in 0..m.dim() {
                let want = members.iter().map(|id| m.vector(*id).unwrap()[d]).sum::<f64>() / members.len() as f64;
                prop_assert!((got[d] - want).abs() <= 1e-12);
            }
        }
        prop_assert_eq!(curated.len(), map.groups().len());
    }

    #[test]
    fn folds_partition_and_balance(n in 1usize..200, k in 1usize..12, master in any::<u64>(), repeat in 0usize..5) {
        prop_assume!(k <= n);
        let folds = fold_assignment(n, k, Seed::new(master), repeat);
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(folds, fold_assignment(n, k, Seed::new(master), repeat));
    }

    #[test]
    fn lift_is_purity_over_baseline(purity in 0.0f64..1.0, n_c in 1usize..500, extra in 0usize..5000) {
        let pool = n_c + extra;
        let l = lift(purity, n_c, pool);
        prop_assert!((l * n_c as f64 / pool as f64 - purity).abs() < 1e-12);
    }
}

/// Replies to a batch with arbitrary JSON values per field.
struct Fuzz(Vec<Value>);

impl ChatClient for Fuzz {
    fn model(&self) -> &str {
        "fuzz"
    }

    fn complete(&self, _: &ChatRequest) -> Result<Value> {
        Ok(Value::Array(self.0.clone()))
    }
}

fn json_leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        (-1000i64..1000).prop_map(|n| json!(n)),
        (-10.0f64..10.0).prop_map(|x| json!(x)),
        prop::sample::select(vec!["none", "low", "moderate", "high", "very_high", "Yes", "no", "maybe", "", "HIGH", "1"])
            .prop_map(|s| json!(s)),
    ]
}

fn json_value() -> impl Strategy<Value = Value> {
    json_leaf().prop_recursive(2, 8, 4, |inner| prop::collection::vec(inner, 0..4).prop_map(Value::Array))
}

fn legal(kind: &FieldKind, v: &LabelValue) -> bool {
    match (kind, v) {
        (FieldKind::Enum { values, missing, .. }, LabelValue::Level(s)) => values.contains(s) && !missing.contains(s),
        (FieldKind::Integer { min, max, .. }, LabelValue::Number(x)) => {
            x.fract() == 0.0 && min.is_none_or(|lo| *x >= lo as f64) && max.is_none_or(|hi| *x <= hi as f64)
        }
        (FieldKind::Binary, LabelValue::Flag(_)) => true,
        (FieldKind::EnumList { values }, LabelValue::Set(items)) => items.iter().all(|s| values.contains(s)),
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Whatever the model sends back, nothing outside a field's declared
    /// domain is ever accepted.
    #[test]
    fn tagger_never_accepts_illegal_values(
        family in prop::sample::select(DimensionSchema::builtin_families()),
        raw in prop::collection::vec(prop::collection::vec(json_value(), 1..8), 1..4),
        drop_field in any::<prop::sample::Index>(),
        echo_wrong in any::<bool>(),
    ) {
        let schema = DimensionSchema::builtin(family).unwrap();
        let names: Vec<String> = (0..raw.len()).map(|i| format!("item {i}")).collect();
        let records: Vec<Value> = raw
            .iter()
            .enumerate()
            .map(|(i, vals)| {
                let mut obj = serde_json::Map::new();
                let echo = if echo_wrong && i == 0 { "someone else".to_string() } else { names[i].clone() };
                obj.insert("ingredient".into(), json!(echo));
                for (j, f) in schema.fields.iter().enumerate() {
                    if i == 1 && j == drop_field.index(schema.fields.len()) {
                        continue;
                    }
                    obj.insert(f.name.clone(), vals[j % vals.len()].clone());
                }
                Value::Object(obj)
            })
            .collect();
        let outcome = tag_batch(&names, &schema, &Fuzz(records)).unwrap();
        prop_assert_eq!(outcome.records.len() + outcome.rejects.len(), names.len());
        for r in &outcome.records {
            prop_assert_eq!(r.values.len(), schema.fields.len());
            for (f, v) in schema.fields.iter().zip(&r.values) {
                if let Some(v) = v {
                    prop_assert!(legal(&f.kind, v), "{}: {:?}", f.name, v);
                }
            }
        }
        if echo_wrong {
            prop_assert!(outcome.rejects.iter().any(|r| r.ingredient == "item 0"));
        }
        if raw.len() > 1 {
            prop_assert!(outcome.rejects.iter().any(|r| r.ingredient == "item 1"));
        }
    }
}
