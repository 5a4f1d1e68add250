use rand::Rng;
use serde::{Deserialize, Serialize};

use super::map::ConsolidationMap;
use crate::corpus::{cosine_with_norms, norm, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::stats::Seed;

/// Number of random cross-group pairs behind the baseline.
pub const BASELINE_PAIRS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupNoise {
    pub canonical_id: i64,
    pub name: String,
    pub variant_count: usize,
    pub members: Vec<i64>,
    pub mean_cosine: f64,
    pub min_cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mean_cosine: f64,
    pub pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantNoiseReport {
    pub groups: Vec<GroupNoise>,
    /// Absent when fewer than two groups have members.
    pub baseline: Option<Baseline>,
}

impl VariantNoiseReport {
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["canonical_id", "name", "variant_count", "mean_cosine", "min_cosine"])?;
        for g in &self.groups {
            w.write_record([
                g.canonical_id.to_string(),
                g.name.clone(),
                g.variant_count.to_string(),
                format!("{:.9}", g.mean_cosine),
                format!("{:.9}", g.min_cosine),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<noise csv>", e))?;
        Ok(())
    }
}

/// Mean and minimum cosine over all unordered pairs of `rows`.
fn pair_stats(matrix: &EmbeddingMatrix, rows: &[usize], norms: &[f64]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    let mut count = 0usize;
    for (i, &a) in rows.iter().enumerate() {
        for &b in &rows[i + 1..] {
            let c = cosine_with_norms(matrix.row(a), matrix.row(b), norms[a], norms[b]);
            sum += c;
            min = min.min(c);
            count += 1;
        }
    }
    (sum / count as f64, min)
}

/// Intra-group cosine scatter of the `top_k` largest consolidation groups,
/// measured in the raw (pre-consolidation) space.
///
/// Groups are ordered by variant count (descending) then canonical id. The
/// baseline averages [`BASELINE_PAIRS`] random pairs of mapped originals
/// drawn from different groups.
pub fn variant_noise(
    matrix: &EmbeddingMatrix,
    map: &ConsolidationMap,
    top_k: usize,
    seed: Seed,
) -> Result<VariantNoiseReport> {
    if top_k == 0 {
        return Err(Error::invalid("top_k must be at least 1"));
    }
    let mut groups: Vec<(i64, Vec<usize>)> = Vec::new();
    for (cid, members) in map.groups() {
        let rows = members
            .iter()
            .map(|id| matrix.require_id(*id))
            .collect::<Result<Vec<_>>>()?;
        if !rows.is_empty() {
            groups.push((cid, rows));
        }
    }
    let norms: Vec<f64> = matrix.rows().map(norm).collect();
    for (_, rows) in &groups {
        if let Some(&r) = rows.iter().find(|&&r| norms[r] == 0.0) {
            return Err(Error::ZeroNorm(matrix.entity(r).id));
        }
    }

    let mut multi: Vec<&(i64, Vec<usize>)> = groups.iter().filter(|(_, r)| r.len() >= 2).collect();
    if multi.is_empty() {
        return Err(Error::degenerate("no consolidation group has two or more variants"));
    }
    multi.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    let report_groups = multi
        .into_iter()
        .take(top_k)
        .map(|(cid, rows)| {
            let (mean, min) = pair_stats(matrix, rows, &norms);
            GroupNoise {
                canonical_id: *cid,
                name: map.catalog[cid].name.clone(),
                variant_count: rows.len(),
                members: rows.iter().map(|&r| matrix.entity(r).id).collect(),
                mean_cosine: mean,
                min_cosine: min,
            }
        })
        .collect();

    let baseline = (groups.len() >= 2).then(|| {
        let flat: Vec<(usize, usize)> = groups
            .iter()
            .enumerate()
            .flat_map(|(g, (_, rows))| rows.iter().map(move |&r| (g, r)))
            .collect();
        let mut rng = seed.rng(0);
        let mut sum = 0.0;
        let mut drawn = 0;
        while drawn < BASELINE_PAIRS {
            let (ga, a) = flat[rng.random_range(0..flat.len())];
            let (gb, b) = flat[rng.random_range(0..flat.len())];
            if ga == gb {
                continue;
            }
            sum += cosine_with_norms(matrix.row(a), matrix.row(b), norms[a], norms[b]);
            drawn += 1;
        }
        Baseline {
            mean_cosine: sum / BASELINE_PAIRS as f64,
            pairs: BASELINE_PAIRS,
            seed: seed.master,
        }
    });

    Ok(VariantNoiseReport {
        groups: report_groups,
        baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Entity;

    fn matrix(rows: Vec<Vec<f64>>) -> EmbeddingMatrix {
        let entities = (1..=rows.len() as i64).map(|i| Entity::new(i, format!("e{i}"))).collect();
        EmbeddingMatrix::new(entities, rows).unwrap()
    }

    fn map(assign: &[(i64, i64)]) -> ConsolidationMap {
        let mut text = String::from("original_id,original_name,canonical_id,canonical_name\n");
        for (o, c) in assign {
            text.push_str(&format!("{o},e{o},{c},c{c}\n"));
        }
        ConsolidationMap::read_csv(text.as_bytes(), None::<&[u8]>).unwrap()
    }

    #[test]
    fn identical_variants_score_one() {
        let m = matrix(vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0, 1.0]]);
        let r = variant_noise(&m, &map(&[(1, 1), (2, 1), (3, 2)]), 5, Seed::new(1)).unwrap();
        assert_eq!(r.groups.len(), 1);
        assert!((r.groups[0].mean_cosine - 1.0).abs() < 1e-15);
        assert!((r.groups[0].min_cosine - 1.0).abs() < 1e-15);
        assert_eq!(r.baseline.as_ref().unwrap().pairs, BASELINE_PAIRS);
    }

    #[test]
    fn orthogonal_variants_score_zero() {
        let m = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let r = variant_noise(&m, &map(&[(1, 1), (2, 1)]), 1, Seed::new(1)).unwrap();
        assert_eq!((r.groups[0].mean_cosine, r.groups[0].min_cosine), (0.0, 0.0));
        assert!(r.baseline.is_none());
    }

    #[test]
    fn groups_sorted_by_size_and_truncated() {
        let m = matrix((0..6).map(|i| vec![1.0, i as f64]).collect());
        let r = variant_noise(&m, &map(&[(1, 1), (2, 1), (3, 2), (4, 2), (5, 2), (6, 3)]), 1, Seed::new(4)).unwrap();
        assert_eq!(r.groups.len(), 1);
        assert_eq!(r.groups[0].canonical_id, 2);
        assert_eq!(r.groups[0].variant_count, 3);
    }

    #[test]
    fn singleton_only_maps_fail() {
        let m = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(variant_noise(&m, &map(&[(1, 1), (2, 2)]), 3, Seed::new(1)).is_err());
        assert!(variant_noise(&m, &map(&[(1, 1), (2, 1)]), 0, Seed::new(1)).is_err());
    }
}
