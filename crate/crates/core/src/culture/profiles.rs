use std::io::Write;

use serde::{Deserialize, Serialize};

use super::CuisineTags;
use crate::axes::Axis;
use crate::corpus::{dot, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::stats::{permutation_p_multi, variance, Seed, Sidedness};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuisineProfile {
    pub cuisine: String,
    pub n: usize,
    /// Unit-centroid projections, one per axis in report order.
    pub projections: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSignificance {
    pub axis: String,
    /// Population variance of the cuisine projections.
    pub variance: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub axes: Vec<String>,
    pub profiles: Vec<CuisineProfile>,
    pub significance: Vec<AxisSignificance>,
    pub n_perm: usize,
    pub seed: u64,
    pub statistic: String,
}

impl ProfileReport {
    /// One row per cuisine, one column per axis, then a p-value row.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["cuisine".to_string(), "n".to_string()];
        header.extend(self.axes.iter().cloned());
        w.write_record(&header)?;
        for p in &self.profiles {
            let mut rec = vec![p.cuisine.clone(), p.n.to_string()];
            rec.extend(p.projections.iter().map(|x| format!("{x:.6}")));
            w.write_record(&rec)?;
        }
        let mut rec = vec!["p_value".to_string(), String::new()];
        rec.extend(self.significance.iter().map(|s| format!("{:.6}", s.p_value)));
        w.write_record(&rec)?;
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Tagged members with their raw inner products and per-axis projections.
struct Tagged {
    n: usize,
    gram: Vec<f64>,
    proj: Vec<Vec<f64>>,
}

impl Tagged {
    /// Unit-centroid projection of every cuisine on every axis, `[axis][cuisine]`.
    fn table(&self, assignment: &[Vec<usize>], n_clusters: usize, n_axes: usize) -> Result<Vec<Vec<f64>>> {
        let mut members = vec![Vec::new(); n_clusters];
        for (i, set) in assignment.iter().enumerate() {
            for &c in set {
                members[c].push(i);
            }
        }
        let mut out = vec![vec![0.0; n_clusters]; n_axes];
        for (c, m) in members.iter().enumerate() {
            let mut sq = 0.0;
            for &i in m {
                let row = &self.gram[i * self.n..(i + 1) * self.n];
                sq += m.iter().map(|&j| row[j]).sum::<f64>();
            }
            if sq <= 0.0 {
                return Err(Error::degenerate(format!("cuisine {c} has a zero centroid")));
            }
            let len = sq.sqrt();
            for (a, col) in out.iter_mut().enumerate() {
                col[c] = m.iter().map(|&i| self.proj[a][i]).sum::<f64>() / len;
            }
        }
        Ok(out)
    }
}

/// Projects each cuisine's L2-normalized centroid onto each axis and tests
/// every axis by permuting tag sets among the tagged entities.
pub fn cuisine_profiles(
    matrix: &EmbeddingMatrix,
    tags: &CuisineTags,
    axes: &[Axis],
    n_perm: usize,
    seed: Seed,
) -> Result<ProfileReport> {
    if axes.is_empty() {
        return Err(Error::invalid("cuisine profiles need at least one axis"));
    }
    if let Some(a) = axes.iter().find(|a| a.dim() != matrix.dim()) {
        return Err(Error::DimensionMismatch {
            expected: matrix.dim(),
            actual: a.dim(),
        });
    }
    let index = tags.index(matrix)?;
    let n_clusters = index.clusters.len();
    for c in 0..n_clusters {
        let n = index.members(c).len();
        if n < 2 {
            return Err(Error::degenerate(format!("cuisine {} has {n} member(s); profiles need two", index.clusters[c])));
        }
    }
    let tagged = index.tagged();
    let rows: Vec<&[f64]> = tagged.iter().map(|&i| matrix.row(index.rows[i])).collect();
    let n = rows.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let g = dot(rows[i], rows[j]);
            gram[i * n + j] = g;
            gram[j * n + i] = g;
        }
    }
    let proj: Vec<Vec<f64>> = axes.iter().map(|a| rows.iter().map(|r| a.project_row(r)).collect()).collect();
    let data = Tagged { n, gram, proj };
    let assignment: Vec<Vec<usize>> = tagged.iter().map(|&i| index.tags[i].clone()).collect();

    let table = data.table(&assignment, n_clusters, axes.len())?;
    let results = permutation_p_multi(
        &assignment,
        |labels| {
            let t = data.table(labels, n_clusters, axes.len())?;
            Ok(t.iter().map(|col| variance(col, 0)).collect())
        },
        n_perm,
        seed,
        Sidedness::Greater,
    )?;
    let profiles = (0..n_clusters)
        .map(|c| CuisineProfile {
            cuisine: index.clusters[c].clone(),
            n: index.members(c).len(),
            projections: table.iter().map(|col| col[c]).collect(),
        })
        .collect();
    let significance = axes
        .iter()
        .zip(results)
        .map(|(a, r)| AxisSignificance {
            axis: a.name.clone(),
            variance: r.statistic,
            p_value: r.p_value,
        })
        .collect();
    Ok(ProfileReport {
        axes: axes.iter().map(|a| a.name.clone()).collect(),
        profiles,
        significance,
        n_perm,
        seed: seed.master,
        statistic: "population variance of cuisine centroid projections; tag sets permuted among tagged entities"
            .into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Entity;

    fn opposed(n_per: usize) -> (EmbeddingMatrix, CuisineTags) {
        let mut rows = Vec::new();
        let mut tags = std::collections::BTreeMap::new();
        for i in 0..3 * n_per {
            let s = 0.05 * (i % 7) as f64;
            let (row, tag): (Vec<f64>, Vec<String>) = match i % 3 {
                0 => (vec![1.0, 0.2 + s, 0.1], vec!["Hi".into()]),
                1 => (vec![-1.0, 0.2, 0.1 + s], vec!["Lo".into()]),
                _ => (vec![0.0, 1.0, s], vec!["Mid".into()]),
            };
            rows.push(row);
            tags.insert(format!("e{i}"), tag);
        }
        let entities = (0..rows.len()).map(|i| Entity::new(i as i64, format!("e{i}"))).collect();
        let tags = CuisineTags {
            pool_spec: String::new(),
            clusters: vec!["Hi".into(), "Lo".into(), "Mid".into()],
            tags,
        };
        (EmbeddingMatrix::new(entities, rows).unwrap(), tags)
    }

    #[test]
    fn opposite_poles_are_significant() {
        let (m, tags) = opposed(10);
        let axes = vec![
            Axis::from_direction("x", vec![1.0, 0.0, 0.0]).unwrap(),
            Axis::from_direction("z", vec![0.0, 0.0, 1.0]).unwrap(),
        ];
        let r = cuisine_profiles(&m, &tags, &axes, 999, Seed::new(5)).unwrap();
        assert!(r.profiles[0].projections[0] > 0.9);
        assert!(r.profiles[1].projections[0] < -0.9);
        assert!(r.significance[0].p_value <= 0.001 + 1e-12);
    }

    #[test]
    fn projection_uses_normalized_centroid() {
        let (m, tags) = opposed(4);
        let axes = vec![Axis::from_direction("y", vec![0.0, 1.0, 0.0]).unwrap()];
        let r = cuisine_profiles(&m, &tags, &axes, 9, Seed::new(1)).unwrap();
        let mid = &r.profiles[2];
        let rows: Vec<usize> = (0..12).filter(|i| i % 3 == 2).collect();
        let c = crate::corpus::centroid(&m, &rows).unwrap();
        let expected = c[1] / crate::corpus::norm(&c);
        assert!((mid.projections[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_singleton_cuisine_and_bad_dim() {
        let (m, mut tags) = opposed(4);
        let axes = vec![Axis::from_direction("x", vec![1.0, 0.0]).unwrap()];
        assert!(cuisine_profiles(&m, &tags, &axes, 9, Seed::new(1)).is_err());
        tags.tags.insert("e0".into(), vec![]);
        tags.tags.insert("e3".into(), vec![]);
        tags.tags.insert("e6".into(), vec![]);
        let axes = vec![Axis::from_direction("x", vec![1.0, 0.0, 0.0]).unwrap()];
        assert!(cuisine_profiles(&m, &tags, &axes, 9, Seed::new(1)).is_err());
    }
}
