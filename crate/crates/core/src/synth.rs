//! Seeded synthetic data with known structure, for tests, benchmarks and
//! the acceptance harness.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::{EmbeddingMatrix, Entity, LabelSet, LabelValue};
use crate::culture::CuisineTags;
use crate::error::Result;
use crate::stats::Seed;

pub const LEVELS: [&str; 5] = ["none", "low", "moderate", "high", "very_high"];

fn gaussian(rng: &mut impl Rng, dim: usize, sd: f64) -> Vec<f64> {
    (0..dim).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let v = gaussian(rng, dim, 1.0);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn entities(n: usize) -> Vec<Entity> {
    (0..n).map(|i| Entity::new(i as i64, format!("e{i}"))).collect()
}

/// Random Gaussian rows named `e0..`.
pub fn random_matrix(n: usize, dim: usize, seed: Seed) -> Result<EmbeddingMatrix> {
    let mut rng = seed.rng(0);
    let rows = (0..n).map(|_| gaussian(&mut rng, dim, 1.0)).collect();
    EmbeddingMatrix::new(entities(n), rows)
}

/// A five-level ordinal gradient planted along a random unit direction.
#[derive(Debug, Clone)]
pub struct PlantedGradient {
    pub matrix: EmbeddingMatrix,
    pub labels: LabelSet,
    pub direction: Vec<f64>,
    pub levels: Vec<usize>,
}

/// `n` entities whose rows are `(level - 2) * s * u + noise`, with noise
/// N(0, 1) per dimension and `s` set so that the signal variance over the
/// balanced levels (`2 s^2`) is `snr` times the total noise power (`dim`).
pub fn planted_gradient(n: usize, dim: usize, snr: f64, seed: Seed) -> Result<PlantedGradient> {
    let mut rng = seed.rng(0);
    let direction = unit(&mut rng, dim);
    let s = (snr * dim as f64 / 2.0).sqrt();
    let mut levels: Vec<usize> = (0..n).map(|i| i % LEVELS.len()).collect();
    levels.shuffle(&mut rng);
    let rows = levels
        .iter()
        .map(|&l| {
            let offset = (l as f64 - 2.0) * s;
            gaussian(&mut rng, dim, 1.0).into_iter().zip(&direction).map(|(x, u)| x + offset * u).collect()
        })
        .collect();
    let mut labels = LabelSet::ordinal("planted", &LEVELS);
    for (i, &l) in levels.iter().enumerate() {
        labels.insert(format!("e{i}"), LabelValue::Level(LEVELS[l].to_string()))?;
    }
    Ok(PlantedGradient {
        matrix: EmbeddingMatrix::new(entities(n), rows)?,
        labels,
        direction,
        levels,
    })
}

/// The same names with their levels permuted.
pub fn shuffled_labels(labels: &LabelSet, seed: Seed) -> Result<LabelSet> {
    let names: Vec<String> = labels.names().map(str::to_string).collect();
    let mut values: Vec<LabelValue> = names.iter().map(|n| labels.get(n).expect("listed").clone()).collect();
    values.shuffle(&mut seed.rng(0));
    let mut out = LabelSet::new(&labels.dimension, labels.kind);
    out.scale = labels.scale.clone();
    out.units = labels.units.clone();
    for (n, v) in names.into_iter().zip(values) {
        out.insert(n, v)?;
    }
    Ok(out)
}

/// Gaussian clusters around random unit centres scaled to `separation`,
/// each point tagged with its cluster's name.
#[derive(Debug, Clone)]
pub struct PlantedClusters {
    pub matrix: EmbeddingMatrix,
    pub tags: CuisineTags,
    pub assignment: Vec<usize>,
}

pub fn planted_clusters(n: usize, dim: usize, k: usize, separation: f64, seed: Seed) -> Result<PlantedClusters> {
    let mut rng = seed.rng(0);
    let centres: Vec<Vec<f64>> = (0..k).map(|_| unit(&mut rng, dim).into_iter().map(|x| x * separation).collect()).collect();
    let clusters: Vec<String> = (0..k).map(|c| format!("C{c}")).collect();
    let assignment: Vec<usize> = (0..n).map(|i| i % k).collect();
    let rows = assignment
        .iter()
        .map(|&c| gaussian(&mut rng, dim, 1.0).into_iter().zip(&centres[c]).map(|(x, m)| x + m).collect())
        .collect();
    let tags: BTreeMap<String, Vec<String>> =
        assignment.iter().enumerate().map(|(i, &c)| (format!("e{i}"), vec![clusters[c].clone()])).collect();
    Ok(PlantedClusters {
        matrix: EmbeddingMatrix::new(entities(n), rows)?,
        tags: CuisineTags {
            pool_spec: format!("{k} planted Gaussian clusters"),
            clusters,
            tags,
        },
        assignment,
    })
}

/// Tags drawn uniformly from `clusters` for every pool member.
pub fn random_tags(names: &[String], clusters: &[String], seed: Seed) -> CuisineTags {
    let mut rng = seed.rng(0);
    let tags = names
        .iter()
        .map(|n| (n.clone(), vec![clusters[rng.random_range(0..clusters.len())].clone()]))
        .collect();
    CuisineTags {
        pool_spec: "random tags".into(),
        clusters: clusters.to_vec(),
        tags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_is_balanced_and_reproducible() {
        let a = planted_gradient(50, 8, 10.0, Seed::new(3)).unwrap();
        let b = planted_gradient(50, 8, 10.0, Seed::new(3)).unwrap();
        assert!(a.matrix.rows().eq(b.matrix.rows()));
        for l in 0..5 {
            assert_eq!(a.levels.iter().filter(|&&x| x == l).count(), 10);
        }
        let norm: f64 = a.direction.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shuffle_keeps_multiset() {
        let g = planted_gradient(30, 4, 1.0, Seed::new(1)).unwrap();
        let s = shuffled_labels(&g.labels, Seed::new(2)).unwrap();
        let count = |set: &LabelSet, lvl: &str| set.iter().filter(|(_, v)| **v == LabelValue::Level(lvl.into())).count();
        for l in LEVELS {
            assert_eq!(count(&g.labels, l), count(&s, l));
        }
        assert_ne!(g.labels, s);
    }
}
