use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::axis::{Axis, AxisData, AxisKind, AxisRecipe, Provenance, TercileCut, Transform};
use crate::corpus::{row_norms, cosine_with_norms, EmbeddingMatrix, LabelKind, LabelSet, LabelValue};
use crate::error::{Error, Result};
use crate::stats::{
    cohens_d, cohens_d_one_sample, mann_whitney_u, permutation_p, spearman, wilcoxon_signed_rank, Seed, Sidedness,
    StatResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Ordinal,
    Binary,
    Measured,
    CategoricalDelta,
}

/// Compact description of the axis behind a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSummary {
    pub kind: AxisKind,
    pub transform: Transform,
    pub low_pole: String,
    pub high_pole: String,
    pub low_n: usize,
    pub high_n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut: Option<TercileCut>,
}

impl From<&Axis> for AxisSummary {
    fn from(axis: &Axis) -> Self {
        Self {
            kind: axis.kind,
            transform: axis.transform,
            low_pole: axis.low.definition.clone(),
            high_pole: axis.high.definition.clone(),
            low_n: axis.low.members.len(),
            high_n: axis.high.members.len(),
            cut: axis.cut,
        }
    }
}

/// Effect sizes for one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub dimension: String,
    pub analysis: Analysis,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spearman: Option<StatResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mann_whitney: Option<StatResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cohens_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilcoxon: Option<StatResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<AxisSummary>,
    pub notes: Vec<String>,
}

impl DimensionReport {
    fn new(dimension: &str, analysis: Analysis, n: usize) -> Self {
        Self {
            dimension: dimension.to_string(),
            analysis,
            n,
            spearman: None,
            mann_whitney: None,
            cohens_d: None,
            wilcoxon: None,
            axis: None,
            notes: Vec::new(),
        }
    }

    /// Headline effect: ρ for rank analyses, d otherwise.
    pub fn headline(&self) -> Option<f64> {
        self.spearman
            .as_ref()
            .map(|s| s.statistic)
            .or(self.cohens_d)
    }
}

/// Spearman ρ between the scalar labels and projections onto a full-data axis.
fn rank_report(matrix: &EmbeddingMatrix, data: &AxisData, analysis: Analysis) -> Result<(DimensionReport, Axis)> {
    if data.len() < 3 {
        return Err(Error::invalid(format!(
            "{}: need at least 3 labeled entities, got {}",
            data.name,
            data.len()
        )));
    }
    let distinct: BTreeSet<u64> = data.values.iter().map(|v| v.to_bits()).collect();
    if distinct.len() < 2 {
        return Err(Error::degenerate(format!("{}: only one distinct label value", data.name)));
    }
    let all = data.all();
    let axis = data.build(matrix, &all, Provenance::FullData)?;
    let projections = data.project_items(matrix, &axis, &all);
    let mut report = DimensionReport::new(&data.name, analysis, data.len());
    report.spearman = Some(spearman(&data.values, &projections)?);
    report.axis = Some(AxisSummary::from(&axis));
    report.notes = data.notes.clone();
    Ok((report, axis))
}

/// Ordinal labels: ρ between level rank and projection on the
/// lowest-level → highest-level axis.
pub fn evaluate_ordinal(matrix: &EmbeddingMatrix, labels: &LabelSet) -> Result<DimensionReport> {
    if labels.kind != LabelKind::Ordinal {
        return Err(Error::invalid(format!("{} is not an ordinal label set", labels.dimension)));
    }
    let data = AxisData::from_labels(matrix, labels, AxisRecipe::new(AxisKind::OrdinalPole))?;
    Ok(rank_report(matrix, &data, Analysis::Ordinal)?.0)
}

/// Measured values: tercile-centroid axis, ρ between value and projection.
pub fn evaluate_measured(
    matrix: &EmbeddingMatrix,
    measured: &LabelSet,
    transform: Transform,
) -> Result<DimensionReport> {
    let recipe = AxisRecipe::new(AxisKind::TercileCentroid).with_transform(transform);
    let data = AxisData::from_labels(matrix, measured, recipe)?;
    let mut report = rank_report(matrix, &data, Analysis::Measured)?.0;
    if let Some(units) = &measured.units {
        report.notes.push(format!("units: {units}"));
    }
    Ok(report)
}

/// Permutation p for the ρ of an ordinal or measured dimension.
///
/// Every shuffle reassigns the scalar labels and rebuilds the axis from the
/// shuffled poles before projecting, so the null includes the optimism of
/// fitting an axis to the labels it is scored against.
pub fn rank_permutation_test(
    matrix: &EmbeddingMatrix,
    labels: &LabelSet,
    transform: Transform,
    n_perm: usize,
    seed: Seed,
    sidedness: Sidedness,
) -> Result<StatResult> {
    let recipe = AxisRecipe::for_labels(labels)?.with_transform(transform);
    if recipe.kind == AxisKind::BinaryCentroid {
        return Err(Error::invalid(format!("{}: binary labels have no rank statistic", labels.dimension)));
    }
    let data = AxisData::from_labels(matrix, labels, recipe)?;
    if data.len() < 3 {
        return Err(Error::invalid(format!("{}: need at least 3 labeled entities", data.name)));
    }
    let all = data.all();
    let statistic = |values: &[f64]| -> Result<f64> {
        let shuffled = AxisData {
            values: values.to_vec(),
            ..data.clone()
        };
        let axis = shuffled.build(matrix, &all, Provenance::FullData)?;
        let projections = shuffled.project_items(matrix, &axis, &all);
        Ok(spearman(values, &projections)?.statistic)
    };
    permutation_p(&data.values, statistic, n_perm, seed, sidedness)
}

/// Binary labels: Mann-Whitney U and Cohen's d between yes and no
/// projections on the no → yes axis.
pub fn evaluate_binary(matrix: &EmbeddingMatrix, labels: &LabelSet) -> Result<DimensionReport> {
    if labels.kind != LabelKind::Binary {
        return Err(Error::invalid(format!("{} is not a binary label set", labels.dimension)));
    }
    let data = AxisData::from_labels(matrix, labels, AxisRecipe::new(AxisKind::BinaryCentroid))?;
    let all = data.all();
    let (no, yes, _) = data.poles(&all)?;
    if yes.len() < 2 || no.len() < 2 {
        return Err(Error::invalid(format!(
            "{}: each class needs at least 2 members (yes {}, no {})",
            labels.dimension,
            yes.len(),
            no.len()
        )));
    }
    let axis = data.build(matrix, &all, Provenance::FullData)?;
    let p_yes = data.project_items(matrix, &axis, &yes);
    let p_no = data.project_items(matrix, &axis, &no);
    let mut report = DimensionReport::new(&labels.dimension, Analysis::Binary, data.len());
    report.mann_whitney = Some(mann_whitney_u(&p_yes, &p_no, Sidedness::TwoSided)?);
    report.cohens_d = Some(cohens_d(&p_yes, &p_no)?);
    report.axis = Some(AxisSummary::from(&axis));
    report.notes = data.notes.clone();
    Ok(report)
}

/// Dispatches on the label kind: ordinal, binary, numeric (tercile) or
/// categorical (delta).
pub fn evaluate(matrix: &EmbeddingMatrix, labels: &LabelSet, transform: Transform) -> Result<DimensionReport> {
    match labels.kind {
        LabelKind::Ordinal => evaluate_ordinal(matrix, labels),
        LabelKind::Binary => evaluate_binary(matrix, labels),
        LabelKind::Numeric => evaluate_measured(matrix, labels, transform),
        LabelKind::Categorical | LabelKind::Tags => {
            Ok(categorical_delta(matrix, labels, CrossReference::OutOfGroup)?.report)
        }
    }
}

/// Which entities form the "cross" side of a categorical delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CrossReference {
    /// Labeled entities sharing no group with the query.
    #[default]
    OutOfGroup,
    /// Every other labeled entity, group-mates included.
    AllOthers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDelta {
    pub deltas: Vec<(i64, f64)>,
    /// Names left out because no other entity shares their group.
    pub excluded: Vec<String>,
    pub report: DimensionReport,
}

/// Deltas smaller than this are indistinguishable from summation rounding.
const DELTA_EPSILON: f64 = 1e-12;

fn groups_of(value: &LabelValue) -> Vec<String> {
    match value {
        LabelValue::Level(l) => vec![l.clone()],
        LabelValue::Set(s) => s.clone(),
        LabelValue::Flag(b) => vec![if *b { "yes" } else { "no" }.to_string()],
        LabelValue::Number(x) => vec![x.to_string()],
    }
}

/// Per-entity within-group minus cross-group mean cosine, with a Wilcoxon
/// signed-rank test (two-sided) and one-sample d on the deltas.
pub fn categorical_delta(
    matrix: &EmbeddingMatrix,
    groups: &LabelSet,
    cross: CrossReference,
) -> Result<CategoricalDelta> {
    let resolved = groups.resolve(matrix)?;
    let items: Vec<(usize, Vec<String>)> = resolved
        .into_iter()
        .map(|(row, v)| (row, groups_of(v)))
        .filter(|(_, g)| !g.is_empty())
        .collect();
    let norms = row_norms(matrix)?;
    let shares = |a: &[String], b: &[String]| a.iter().any(|x| b.contains(x));
    let mut deltas = Vec::new();
    let mut excluded = Vec::new();
    for (i, (ri, gi)) in items.iter().enumerate() {
        let (mut within, mut nw, mut other, mut no) = (0.0, 0usize, 0.0, 0usize);
        for (j, (rj, gj)) in items.iter().enumerate() {
            if i == j {
                continue;
            }
            let c = cosine_with_norms(matrix.row(*ri), matrix.row(*rj), norms[*ri], norms[*rj]);
            let mate = shares(gi, gj);
            if mate {
                within += c;
                nw += 1;
            }
            if !mate || cross == CrossReference::AllOthers {
                other += c;
                no += 1;
            }
        }
        if nw == 0 || no == 0 {
            excluded.push(matrix.entity(*ri).name.clone());
            continue;
        }
        let delta = within / nw as f64 - other / no as f64;
        // Differences at rounding level are treated as exact ties.
        let delta = if delta.abs() < DELTA_EPSILON { 0.0 } else { delta };
        deltas.push((matrix.entity(*ri).id, delta));
    }
    if deltas.is_empty() {
        return Err(Error::degenerate(format!(
            "{}: no entity shares a group with another",
            groups.dimension
        )));
    }
    let values: Vec<f64> = deltas.iter().map(|(_, d)| *d).collect();
    let mut report = DimensionReport::new(&groups.dimension, Analysis::CategoricalDelta, deltas.len());
    match wilcoxon_signed_rank(&values, Sidedness::TwoSided) {
        Ok(w) => report.wilcoxon = Some(w),
        Err(e) => report.notes.push(format!("wilcoxon not computed: {e}")),
    }
    match cohens_d_one_sample(&values) {
        Ok(d) => report.cohens_d = Some(d),
        Err(e) => report.notes.push(format!("effect size not computed: {e}")),
    }
    if !excluded.is_empty() {
        report
            .notes
            .push(format!("{} entities in singleton groups excluded", excluded.len()));
    }
    report.notes.push(format!(
        "cross reference: {}",
        match cross {
            CrossReference::OutOfGroup => "entities outside the group",
            CrossReference::AllOthers => "all other entities",
        }
    ));
    Ok(CategoricalDelta {
        deltas,
        excluded,
        report,
    })
}

/// Evaluates `labels` (or `measured`, when given) separately on the entities
/// in `subset` and on the rest, rebuilding the axis on each side.
pub fn subset_report(
    matrix: &EmbeddingMatrix,
    labels: &LabelSet,
    measured: Option<&LabelSet>,
    subset: &BTreeSet<i64>,
    transform: Transform,
) -> Result<(DimensionReport, DimensionReport)> {
    let target = measured.unwrap_or(labels);
    let id_of = |name: &str| matrix.row_of_name(name).map(|r| matrix.entity(r).id);
    let inside = target.filtered(|name| id_of(name).is_some_and(|id| subset.contains(&id)));
    let outside = target.filtered(|name| id_of(name).is_some_and(|id| !subset.contains(&id)));
    let run = |side: &LabelSet, which: &str| {
        evaluate(matrix, side, transform).map_err(|e| {
            Error::invalid(format!("{which} of {}: {e}", target.dimension))
        })
    };
    let mut a = run(&inside, "subset")?;
    let mut b = run(&outside, "complement")?;
    a.notes.push(format!("subset of {} entities", subset.len()));
    b.notes.push("complement of subset".to_string());
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Entity;

    fn matrix(rows: Vec<Vec<f64>>) -> EmbeddingMatrix {
        let entities = (0..rows.len()).map(|i| Entity::new(i as i64 + 1, format!("e{}", i + 1))).collect();
        EmbeddingMatrix::new(entities, rows).unwrap()
    }

    #[test]
    fn noise_free_gradient_is_perfect() {
        let levels = ["none", "low", "moderate", "high", "very_high"];
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64, 0.0]).collect();
        let m = matrix(rows);
        let mut labels = LabelSet::ordinal("umami", &levels);
        for (i, l) in levels.iter().enumerate() {
            labels.insert(format!("e{}", i + 1), LabelValue::Level(l.to_string())).unwrap();
        }
        let r = evaluate_ordinal(&m, &labels).unwrap();
        assert_eq!(r.spearman.unwrap().statistic, 1.0);
        assert_eq!(r.n, 5);
    }

    #[test]
    fn permutation_rebuilds_the_axis() {
        let levels = ["none", "low", "moderate", "high", "very_high"];
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, (i % 5) as f64, ((i * 7) % 3) as f64]).collect();
        let m = matrix(rows);
        let mut labels = LabelSet::ordinal("umami", &levels);
        for i in 0..20 {
            labels.insert(format!("e{}", i + 1), LabelValue::Level(levels[i % 5].to_string())).unwrap();
        }
        let r = rank_permutation_test(&m, &labels, Transform::Identity, 99, Seed::new(1), Sidedness::Greater).unwrap();
        assert!(r.statistic > 0.9);
        assert!(r.p_value <= 0.02, "{}", r.p_value);
        let again = rank_permutation_test(&m, &labels, Transform::Identity, 99, Seed::new(1), Sidedness::Greater).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn single_level_fails() {
        let m = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let mut labels = LabelSet::ordinal("x", &["a", "b"]);
        for i in 1..=3 {
            labels.insert(format!("e{i}"), LabelValue::Level("a".into())).unwrap();
        }
        assert!(evaluate_ordinal(&m, &labels).is_err());
    }

    #[test]
    fn binary_singleton_class_fails() {
        let m = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let mut labels = LabelSet::new("b", LabelKind::Binary);
        labels.insert("e1", LabelValue::Flag(true)).unwrap();
        labels.insert("e2", LabelValue::Flag(false)).unwrap();
        labels.insert("e3", LabelValue::Flag(false)).unwrap();
        assert!(evaluate_binary(&m, &labels).is_err());
    }

    #[test]
    fn identical_embeddings_give_zero_deltas() {
        let m = matrix(vec![vec![1.0, 2.0]; 6]);
        let mut labels = LabelSet::new("zone", LabelKind::Categorical);
        for i in 1..=6 {
            let g = if i <= 3 { "a" } else { "b" };
            labels.insert(format!("e{i}"), LabelValue::Level(g.into())).unwrap();
        }
        let out = categorical_delta(&m, &labels, CrossReference::OutOfGroup).unwrap();
        assert!(out.deltas.iter().all(|(_, d)| *d == 0.0));
        assert!(out.report.wilcoxon.is_none());
    }

    #[test]
    fn singleton_groups_are_excluded() {
        let m = matrix(vec![vec![1.0, 0.1], vec![1.0, 0.2], vec![0.1, 1.0], vec![0.5, 0.5]]);
        let mut labels = LabelSet::new("zone", LabelKind::Categorical);
        labels.insert("e1", LabelValue::Level("a".into())).unwrap();
        labels.insert("e2", LabelValue::Level("a".into())).unwrap();
        labels.insert("e3", LabelValue::Level("b".into())).unwrap();
        labels.insert("e4", LabelValue::Level("c".into())).unwrap();
        let out = categorical_delta(&m, &labels, CrossReference::OutOfGroup).unwrap();
        assert_eq!(out.deltas.len(), 2);
        assert_eq!(out.excluded, vec!["e3".to_string(), "e4".to_string()]);
        assert!(out.deltas.iter().all(|(_, d)| *d > 0.0));
    }

    #[test]
    fn all_singletons_fail() {
        let m = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let mut labels = LabelSet::new("zone", LabelKind::Categorical);
        labels.insert("e1", LabelValue::Level("a".into())).unwrap();
        labels.insert("e2", LabelValue::Level("b".into())).unwrap();
        assert!(categorical_delta(&m, &labels, CrossReference::OutOfGroup).is_err());
    }
}
