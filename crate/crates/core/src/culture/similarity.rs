use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{CuisineTags, PoolGram, TagIndex};
use crate::corpus::{cosine, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::stats::{cohens_d, mann_whitney_u, mean, resample, summarize, wilcoxon_signed_rank, Seed, Sidedness, StatResult, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraCuisine {
    pub cuisine: String,
    pub n: usize,
    pub pairs: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraReport {
    pub pool_size: usize,
    pub cuisines: Vec<IntraCuisine>,
    /// Mean of the per-cuisine means.
    pub overall: f64,
    /// Mean pairwise cosine over the whole pool.
    pub baseline: f64,
    pub excluded: Vec<String>,
    pub notes: Vec<String>,
}

impl IntraReport {
    pub fn cuisine(&self, name: &str) -> Option<&IntraCuisine> {
        self.cuisines.iter().find(|c| c.cuisine == name)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cuisine", "n", "pairs", "mean_cosine"])?;
        for c in &self.cuisines {
            w.write_record([c.cuisine.clone(), c.n.to_string(), c.pairs.to_string(), format!("{:.6}", c.mean)])?;
        }
        w.write_record(["mean".to_string(), String::new(), String::new(), format!("{:.6}", self.overall)])?;
        w.write_record([
            "global_baseline".to_string(),
            self.pool_size.to_string(),
            String::new(),
            format!("{:.6}", self.baseline),
        ])?;
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn mean_pair_cosine(gram: &PoolGram, members: &[usize]) -> (usize, f64) {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            total += gram.get(i, j);
            pairs += 1;
        }
    }
    (pairs, if pairs == 0 { f64::NAN } else { total / pairs as f64 })
}

/// Per-cuisine (member count, pair count, mean cosine) among `members`.
fn intra_means(gram: &PoolGram, index: &TagIndex, members: &[usize]) -> Vec<(usize, usize, f64)> {
    (0..index.clusters.len())
        .map(|c| {
            let in_c: Vec<usize> = members.iter().copied().filter(|&i| index.tags[i].contains(&c)).collect();
            let (pairs, m) = mean_pair_cosine(gram, &in_c);
            (in_c.len(), pairs, m)
        })
        .collect()
}

/// Mean pairwise cosine within each cuisine plus the pool-wide baseline.
///
/// Cuisines with fewer than two members are excluded and listed.
pub fn intra_cluster_similarity(matrix: &EmbeddingMatrix, tags: &CuisineTags) -> Result<IntraReport> {
    let index = tags.index(matrix)?;
    let gram = PoolGram::new(matrix, &index.rows)?;
    let all: Vec<usize> = (0..index.len()).collect();
    let mut cuisines = Vec::new();
    let mut excluded = Vec::new();
    let mut notes = Vec::new();
    for (c, (n, pairs, m)) in intra_means(&gram, &index, &all).into_iter().enumerate() {
        if n < 2 {
            excluded.push(index.clusters[c].clone());
            notes.push(format!("{} excluded: {n} member(s)", index.clusters[c]));
            continue;
        }
        cuisines.push(IntraCuisine {
            cuisine: index.clusters[c].clone(),
            n,
            pairs,
            mean: m,
        });
    }
    if cuisines.is_empty() {
        return Err(Error::degenerate("no cuisine has two or more members"));
    }
    let (_, baseline) = mean_pair_cosine(&gram, &all);
    let means: Vec<f64> = cuisines.iter().map(|c| c.mean).collect();
    Ok(IntraReport {
        pool_size: index.len(),
        overall: mean(&means),
        cuisines,
        baseline,
        excluded,
        notes,
    })
}

/// Wilcoxon signed-rank test on per-cuisine deltas `a - b` over the
/// cuisines evaluated in both reports.
pub fn compare_intra(a: &IntraReport, b: &IntraReport, sidedness: Sidedness) -> Result<StatResult> {
    let deltas: Vec<f64> = a
        .cuisines
        .iter()
        .filter_map(|x| b.cuisine(&x.cuisine).map(|y| x.mean - y.mean))
        .collect();
    if deltas.is_empty() {
        return Err(Error::degenerate("the reports share no evaluated cuisine"));
    }
    wilcoxon_signed_rank(&deltas, sidedness)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampledIntra {
    pub target_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub cuisines: BTreeMap<String, Summary>,
    pub notes: Vec<String>,
}

/// Intra-cuisine means over subsamples of the pool drawn without replacement.
pub fn subsampled_intra_similarity(
    matrix: &EmbeddingMatrix,
    tags: &CuisineTags,
    target_size: usize,
    iterations: usize,
    seed: Seed,
) -> Result<SubsampledIntra> {
    let index = tags.index(matrix)?;
    if iterations < 2 {
        return Err(Error::invalid("subsampling needs at least two iterations"));
    }
    let gram = PoolGram::new(matrix, &index.rows)?;
    let positions: Vec<usize> = (0..index.len()).collect();
    let draws = resample(&positions, target_size, iterations, seed, |m| Ok(intra_means(&gram, &index, m)))?;
    let mut cuisines = BTreeMap::new();
    let mut notes = Vec::new();
    for (c, name) in index.clusters.iter().enumerate() {
        let values: Vec<f64> = draws.iter().map(|d| d[c]).filter(|d| d.0 >= 2).map(|d| d.2).collect();
        if values.len() < 2 {
            notes.push(format!("{name} has two members in only {} subsamples", values.len()));
            continue;
        }
        if values.len() < iterations {
            notes.push(format!("{name} evaluable in {} of {iterations} subsamples", values.len()));
        }
        cuisines.insert(name.clone(), summarize(&values)?);
    }
    Ok(SubsampledIntra {
        target_size,
        iterations,
        seed: seed.master,
        cuisines,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidDistanceTest {
    pub distances_a: Vec<f64>,
    pub distances_b: Vec<f64>,
    pub mean_a: f64,
    pub mean_b: f64,
    pub test: StatResult,
    /// Cohen's d of `b` over `a`: positive when `a` is tighter.
    pub d: f64,
    pub notes: Vec<String>,
}

/// Cosine distance of each tagged member to its own cuisine centroid, one
/// value per (entity, cuisine) membership, over cuisines of two or more.
fn centroid_distances(matrix: &EmbeddingMatrix, tags: &CuisineTags) -> Result<Vec<f64>> {
    let index = tags.index(matrix)?;
    let mut out = Vec::new();
    for c in 0..index.clusters.len() {
        let members = index.members(c);
        if members.len() < 2 {
            continue;
        }
        let rows: Vec<usize> = members.iter().map(|&i| index.rows[i]).collect();
        let centre = crate::corpus::centroid(matrix, &rows)?;
        for &r in &rows {
            out.push(1.0 - cosine(matrix.row(r), &centre)?);
        }
    }
    if out.is_empty() {
        return Err(Error::degenerate("no tagged entity belongs to a cuisine of two or more"));
    }
    Ok(out)
}

/// Two-sided Mann-Whitney U and Cohen's d between the centroid-distance
/// distributions of two tagged spaces.
pub fn centroid_distance_test(
    matrix_a: &EmbeddingMatrix,
    tags_a: &CuisineTags,
    matrix_b: &EmbeddingMatrix,
    tags_b: &CuisineTags,
) -> Result<CentroidDistanceTest> {
    let a = centroid_distances(matrix_a, tags_a)?;
    let b = centroid_distances(matrix_b, tags_b)?;
    let test = mann_whitney_u(&a, &b, Sidedness::TwoSided)?;
    let d = if a.len() >= 2 && b.len() >= 2 { cohens_d(&b, &a)? } else { f64::NAN };
    Ok(CentroidDistanceTest {
        mean_a: mean(&a),
        mean_b: mean(&b),
        distances_a: a,
        distances_b: b,
        test,
        d,
        notes: vec!["entities tagged with several cuisines contribute one distance per cuisine".into()],
    })
}
