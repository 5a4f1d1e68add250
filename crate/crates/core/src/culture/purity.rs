use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{intersects, CuisineTags, PoolGram, TagIndex};
use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::stats::{mean, resample, summarize, Seed, Summary};

/// Purity divided by the random baseline `n_c / n_pool`.
pub fn lift(purity: f64, n_c: usize, n_pool: usize) -> f64 {
    purity / (n_c as f64 / n_pool as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuisinePurity {
    pub cuisine: String,
    pub n: usize,
    pub purity: f64,
    pub baseline: f64,
    pub lift: f64,
}

impl CuisinePurity {
    pub fn new(cuisine: impl Into<String>, n: usize, pool_size: usize, purity: f64) -> Self {
        Self {
            cuisine: cuisine.into(),
            n,
            purity,
            baseline: n as f64 / pool_size as f64,
            lift: lift(purity, n, pool_size),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityReport {
    pub k: usize,
    pub pool_size: usize,
    pub cuisines: Vec<CuisinePurity>,
    pub mean_purity: f64,
    /// Arithmetic mean of the per-cuisine lifts.
    pub mean_lift: f64,
}

impl PurityReport {
    fn from_rows(k: usize, pool_size: usize, cuisines: Vec<CuisinePurity>) -> Self {
        let purities: Vec<f64> = cuisines.iter().map(|c| c.purity).collect();
        let lifts: Vec<f64> = cuisines.iter().map(|c| c.lift).collect();
        Self {
            k,
            pool_size,
            mean_purity: mean(&purities),
            mean_lift: mean(&lifts),
            cuisines,
        }
    }

    pub fn cuisine(&self, name: &str) -> Option<&CuisinePurity> {
        self.cuisines.iter().find(|c| c.cuisine == name)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cuisine", "n", "purity", "baseline", "lift"])?;
        for c in &self.cuisines {
            w.write_record([
                c.cuisine.clone(),
                c.n.to_string(),
                format!("{:.6}", c.purity),
                format!("{:.6}", c.baseline),
                format!("{:.6}", c.lift),
            ])?;
        }
        w.write_record([
            "mean".to_string(),
            String::new(),
            format!("{:.6}", self.mean_purity),
            String::new(),
            format!("{:.6}", self.mean_lift),
        ])?;
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Per-cuisine member counts and summed neighbour-match fractions over the
/// pool positions in `members`. Neighbours come from `members` only.
fn purity_sums(gram: &PoolGram, index: &TagIndex, members: &[usize], k: usize) -> Vec<(usize, f64)> {
    let per_query: Vec<(usize, f64)> = members
        .par_iter()
        .filter(|&&q| !index.tags[q].is_empty())
        .map(|&q| {
            let mut candidates: Vec<(f64, usize)> = members
                .iter()
                .filter(|&&j| j != q)
                .map(|&j| (gram.get(q, j), j))
                .collect();
            // Higher similarity first; equal similarity resolves to the lower id.
            let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
                b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
            };
            if k < candidates.len() {
                candidates.select_nth_unstable_by(k - 1, order);
                candidates.truncate(k);
            }
            let hits = candidates
                .iter()
                .filter(|(_, j)| intersects(&index.tags[q], &index.tags[*j]))
                .count();
            (q, hits as f64 / k as f64)
        })
        .collect();
    let mut sums = vec![(0usize, 0.0f64); index.clusters.len()];
    for (q, frac) in per_query {
        for &c in &index.tags[q] {
            sums[c].0 += 1;
            sums[c].1 += frac;
        }
    }
    sums
}

/// Exact cosine kNN purity and lift of every cuisine over the tag file's pool.
///
/// Untagged pool members take part as neighbours and never match.
pub fn knn_purity(matrix: &EmbeddingMatrix, tags: &CuisineTags, k: usize) -> Result<PurityReport> {
    let index = tags.index(matrix)?;
    let pool = index.len();
    if k == 0 || k >= pool {
        return Err(Error::invalid(format!("k = {k} must be in 1..{pool} (pool size)")));
    }
    let gram = PoolGram::new(matrix, &index.rows)?;
    let members: Vec<usize> = (0..pool).collect();
    let sums = purity_sums(&gram, &index, &members, k);
    let mut rows = Vec::with_capacity(sums.len());
    for (c, (n, total)) in sums.into_iter().enumerate() {
        if n == 0 {
            return Err(Error::degenerate(format!("cuisine {} has no pool members", index.clusters[c])));
        }
        rows.push(CuisinePurity::new(&index.clusters[c], n, pool, total / n as f64));
    }
    Ok(PurityReport::from_rows(k, pool, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampledCuisine {
    pub cuisine: String,
    /// Iterations in which the cuisine kept at least one member.
    pub present: usize,
    pub n: Summary,
    pub purity: Summary,
    pub lift: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampledPurity {
    pub k: usize,
    pub pool_size: usize,
    pub target_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub cuisines: Vec<SubsampledCuisine>,
    pub mean_purity: Summary,
    pub mean_lift: Summary,
    pub notes: Vec<String>,
}

impl SubsampledPurity {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "cuisine", "present", "n_mean", "purity_mean", "purity_ci_low", "purity_ci_high", "lift_mean",
            "lift_ci_low", "lift_ci_high",
        ])?;
        let fmt = |x: f64| format!("{x:.6}");
        for c in &self.cuisines {
            w.write_record([
                c.cuisine.clone(),
                c.present.to_string(),
                fmt(c.n.mean),
                fmt(c.purity.mean),
                fmt(c.purity.ci_low),
                fmt(c.purity.ci_high),
                fmt(c.lift.mean),
                fmt(c.lift.ci_low),
                fmt(c.lift.ci_high),
            ])?;
        }
        w.write_record([
            "mean".to_string(),
            self.iterations.to_string(),
            String::new(),
            fmt(self.mean_purity.mean),
            fmt(self.mean_purity.ci_low),
            fmt(self.mean_purity.ci_high),
            fmt(self.mean_lift.mean),
            fmt(self.mean_lift.ci_low),
            fmt(self.mean_lift.ci_high),
        ])?;
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Purity over `iterations` subsamples of the pool drawn without replacement
/// to `target_size`, each scored with baselines from its own composition.
pub fn subsampled_purity(
    matrix: &EmbeddingMatrix,
    tags: &CuisineTags,
    target_size: usize,
    iterations: usize,
    k: usize,
    seed: Seed,
) -> Result<SubsampledPurity> {
    let index = tags.index(matrix)?;
    let pool = index.len();
    if target_size > pool {
        return Err(Error::invalid(format!("target size {target_size} exceeds pool of {pool}")));
    }
    if k == 0 || k >= target_size {
        return Err(Error::invalid(format!("k = {k} must be in 1..{target_size} (subsample size)")));
    }
    if iterations < 2 {
        return Err(Error::invalid("subsampling needs at least two iterations"));
    }
    let gram = PoolGram::new(matrix, &index.rows)?;
    let positions: Vec<usize> = (0..pool).collect();
    let draws = resample(&positions, target_size, iterations, seed, |members| {
        Ok(purity_sums(&gram, &index, members, k))
    })?;

    let n_clusters = index.clusters.len();
    let mut notes = Vec::new();
    let mut cuisines = Vec::with_capacity(n_clusters);
    for c in 0..n_clusters {
        let present: Vec<(usize, f64)> = draws
            .iter()
            .map(|d| d[c])
            .filter(|&(n, _)| n > 0)
            .map(|(n, total)| (n, total / n as f64))
            .collect();
        if present.len() < 2 {
            notes.push(format!(
                "{} has members in {} of {iterations} subsamples; no interval reported",
                index.clusters[c],
                present.len()
            ));
            continue;
        }
        if present.len() < iterations {
            notes.push(format!(
                "{} absent from {} of {iterations} subsamples",
                index.clusters[c],
                iterations - present.len()
            ));
        }
        let ns: Vec<f64> = present.iter().map(|p| p.0 as f64).collect();
        let purities: Vec<f64> = present.iter().map(|p| p.1).collect();
        let lifts: Vec<f64> = present.iter().map(|&(n, p)| lift(p, n, target_size)).collect();
        cuisines.push(SubsampledCuisine {
            cuisine: index.clusters[c].clone(),
            present: present.len(),
            n: summarize(&ns)?,
            purity: summarize(&purities)?,
            lift: summarize(&lifts)?,
        });
    }
    let mut mean_purities = Vec::with_capacity(iterations);
    let mut mean_lifts = Vec::with_capacity(iterations);
    for d in &draws {
        let present: Vec<(usize, f64)> =
            d.iter().filter(|(n, _)| *n > 0).map(|&(n, t)| (n, t / n as f64)).collect();
        if present.is_empty() {
            continue;
        }
        mean_purities.push(mean(&present.iter().map(|p| p.1).collect::<Vec<_>>()));
        mean_lifts.push(mean(&present.iter().map(|&(n, p)| lift(p, n, target_size)).collect::<Vec<_>>()));
    }
    if mean_purities.len() < 2 {
        return Err(Error::degenerate("fewer than two subsamples contain any tagged member"));
    }
    Ok(SubsampledPurity {
        k,
        pool_size: pool,
        target_size,
        iterations,
        seed: seed.master,
        cuisines,
        mean_purity: summarize(&mean_purities)?,
        mean_lift: summarize(&mean_lifts)?,
        notes,
    })
}
