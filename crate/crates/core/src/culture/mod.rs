//! Cultural-cluster analytics over a tagged pool: neighbourhood purity and
//! lift, intra-cuisine similarity, centroid distances and cuisine profiles
//! along semantic axes.

mod profiles;
mod purity;
mod similarity;
mod tags;

use rayon::prelude::*;

use crate::corpus::{norm, EmbeddingMatrix};
use crate::error::{Error, Result};

pub use profiles::{cuisine_profiles, AxisSignificance, CuisineProfile, ProfileReport};
pub use purity::{
    knn_purity, lift, subsampled_purity, CuisinePurity, PurityReport, SubsampledCuisine,
    SubsampledPurity,
};
pub use similarity::{
    centroid_distance_test, compare_intra, intra_cluster_similarity, subsampled_intra_similarity,
    CentroidDistanceTest, IntraCuisine, IntraReport, SubsampledIntra,
};
pub use tags::{CuisineTags, TagIndex};

/// Cosine similarities between all pool members, row-major.
pub(crate) struct PoolGram {
    n: usize,
    values: Vec<f64>,
}

impl PoolGram {
    pub(crate) fn new(matrix: &EmbeddingMatrix, rows: &[usize]) -> Result<Self> {
        let units: Vec<Vec<f64>> = rows
            .iter()
            .map(|&r| {
                let v = matrix.row(r);
                let n = norm(v);
                if n == 0.0 {
                    return Err(Error::ZeroNorm(matrix.entity(r).id));
                }
                Ok(v.iter().map(|x| x / n).collect())
            })
            .collect::<Result<_>>()?;
        let raw: Vec<&[f64]> = rows.iter().map(|&r| matrix.row(r)).collect();
        let n = rows.len();
        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let (a, raw) = (&units[i], &raw);
                units.iter().enumerate().map(move |(j, b)| {
                    // Identical rows are exactly similar; skip the rounding of the dot product.
                    if raw[i] == raw[j] {
                        1.0
                    } else {
                        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0)
                    }
                })
            })
            .collect();
        Ok(Self { n, values })
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

#[inline]
pub(crate) fn intersects(a: &[usize], b: &[usize]) -> bool {
    a.iter().any(|x| b.contains(x))
}
