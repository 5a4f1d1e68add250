//! Repeated k-fold cross-validation of axis projections: each fold's axis is
//! built from its training entities only and scored on the held-out ones.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axes::{AxisData, AxisKind, AxisRecipe, Provenance};
use crate::corpus::{EmbeddingMatrix, LabelSet};
use crate::error::{Error, Result};
use crate::stats::{cohens_d, mean, sd, spearman, Seed};

/// Mean held-out fold size below which a report is flagged as high variance.
pub const SMALL_FOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SpearmanRho,
    CohensD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub repeats: usize,
    pub seed: Seed,
    pub recipe: AxisRecipe,
    pub metric: Metric,
}

impl CvConfig {
    /// Ten folds, twenty repeats, and the metric matching the recipe: d for
    /// binary axes, ρ otherwise.
    pub fn new(recipe: AxisRecipe, seed: Seed) -> Self {
        let metric = match recipe.kind {
            AxisKind::BinaryCentroid => Metric::CohensD,
            _ => Metric::SpearmanRho,
        };
        Self {
            k: 10,
            repeats: 20,
            seed,
            recipe,
            metric,
        }
    }

    pub fn for_labels(labels: &LabelSet, seed: Seed) -> Result<Self> {
        Ok(Self::new(AxisRecipe::for_labels(labels)?, seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldValue {
    pub repeat: usize,
    pub fold: usize,
    pub n_test: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub repeat: usize,
    pub fold: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub dimension: String,
    pub n: usize,
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub metric: Metric,
    pub recipe: AxisRecipe,
    /// Metric on the full data with the full-data axis.
    pub in_sample: f64,
    pub mean: f64,
    /// Population SD over the scored folds.
    pub sd: f64,
    pub mean_fold_size: f64,
    pub high_variance: bool,
    pub values: Vec<FoldValue>,
    pub skipped: Vec<SkippedFold>,
    pub notes: Vec<String>,
}

/// Splits a seeded permutation of `0..n` into `k` contiguous blocks; the
/// first `n % k` blocks get one extra item.
pub fn fold_assignment(n: usize, k: usize, seed: Seed, repeat: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng(repeat as u64));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    folds
}

/// Metric over `items` given their projections; `Err`
/// carries the reason the items cannot support the metric.
fn score(data: &AxisData, items: &[usize], projections: &[f64], metric: Metric) -> std::result::Result<f64, String> {
    match metric {
        Metric::SpearmanRho => {
            if items.len() < 3 {
                return Err(format!("held-out fold of {} is too small for rho", items.len()));
            }
            let values: Vec<f64> = items.iter().map(|&i| data.values[i]).collect();
            spearman(&values, projections)
                .map(|r| r.statistic)
                .map_err(|e| e.to_string())
        }
        Metric::CohensD => {
            let (mut yes, mut no) = (Vec::new(), Vec::new());
            for (&i, &p) in items.iter().zip(projections) {
                if data.values[i] == 1.0 {
                    yes.push(p);
                } else {
                    no.push(p);
                }
            }
            if yes.len() < 2 || no.len() < 2 {
                return Err(format!(
                    "held-out fold has {} yes and {} no; d needs two of each",
                    yes.len(),
                    no.len()
                ));
            }
            cohens_d(&yes, &no).map_err(|e| e.to_string())
        }
    }
}

enum FoldOutcome {
    Scored(FoldValue),
    Skipped(SkippedFold),
}

fn run_repeat(matrix: &EmbeddingMatrix, data: &AxisData, config: &CvConfig, repeat: usize) -> Vec<FoldOutcome> {
    let folds = fold_assignment(data.len(), config.k, config.seed, repeat);
    let mut in_test = vec![usize::MAX; data.len()];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            in_test[i] = f;
        }
    }
    folds
        .iter()
        .enumerate()
        .map(|(fold, test)| {
            let skip = |reason: String| FoldOutcome::Skipped(SkippedFold { repeat, fold, reason });
            let train: Vec<usize> = (0..data.len()).filter(|&i| in_test[i] != fold).collect();
            let axis = match data.build(matrix, &train, Provenance::Fold { repeat, fold }) {
                Ok(axis) => axis,
                Err(e) => return skip(format!("training axis: {e}")),
            };
            let projections = data.project_items(matrix, &axis, test);
            match score(data, test, &projections, config.metric) {
                Ok(value) => FoldOutcome::Scored(FoldValue {
                    repeat,
                    fold,
                    n_test: test.len(),
                    value,
                }),
                Err(reason) => skip(reason),
            }
        })
        .collect()
}

/// Cross-validates prepared axis data.
pub fn cv_evaluate_data(matrix: &EmbeddingMatrix, data: &AxisData, config: &CvConfig) -> Result<CvReport> {
    if config.k < 2 || config.repeats < 1 {
        return Err(Error::invalid("cross-validation needs k >= 2 and at least one repeat"));
    }
    let n = data.len();
    if config.k > n {
        return Err(Error::invalid(format!("k = {} exceeds the {n} labeled entities", config.k)));
    }
    let all = data.all();
    let full_axis = data.build(matrix, &all, Provenance::FullData)?;
    let in_sample = score(data, &all, &data.project_items(matrix, &full_axis, &all), config.metric)
        .map_err(Error::Degenerate)?;

    let outcomes: Vec<Vec<FoldOutcome>> = (0..config.repeats)
        .into_par_iter()
        .map(|r| run_repeat(matrix, data, config, r))
        .collect();
    let mut values = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            FoldOutcome::Scored(v) => values.push(v),
            FoldOutcome::Skipped(s) => skipped.push(s),
        }
    }
    if values.is_empty() {
        return Err(Error::degenerate(format!(
            "{}: every fold was skipped ({})",
            data.name,
            skipped.first().map_or("", |s| s.reason.as_str())
        )));
    }
    let scores: Vec<f64> = values.iter().map(|v| v.value).collect();
    let mean_fold_size = n as f64 / config.k as f64;
    let high_variance = mean_fold_size < SMALL_FOLD;
    let mut notes = data.notes.clone();
    notes.push("held-out metric computed over all held-out entities, poles included".to_string());
    if high_variance {
        notes.push(format!(
            "held-out folds hold about {mean_fold_size:.1} entities; fold metrics are high variance"
        ));
    }
    if !skipped.is_empty() {
        notes.push(format!("{} of {} folds skipped", skipped.len(), config.k * config.repeats));
    }
    Ok(CvReport {
        dimension: data.name.clone(),
        n,
        k: config.k,
        repeats: config.repeats,
        seed: config.seed.master,
        metric: config.metric,
        recipe: config.recipe,
        in_sample,
        mean: mean(&scores),
        sd: sd(&scores, 0),
        mean_fold_size,
        high_variance,
        values,
        skipped,
        notes,
    })
}

/// Repeated k-fold cross-validated axis evaluation of `labels`.
pub fn cv_evaluate(matrix: &EmbeddingMatrix, labels: &LabelSet, config: &CvConfig) -> Result<CvReport> {
    let data = AxisData::from_labels(matrix, labels, config.recipe)?;
    cv_evaluate_data(matrix, &data, config)
}
