use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::axis::{Axis, AxisData, AxisKind, AxisRecipe};
use crate::corpus::{cosine, dot, norm, row_norms, cosine_with_norms, EmbeddingMatrix, LabelSet};
use crate::error::{Error, Result};
use crate::stats::{classical_mds, residualize, spearman, Seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialRow {
    pub axis: String,
    pub n: usize,
    pub raw_rho: f64,
    pub partial_rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub axes: Vec<String>,
    pub cosine: Vec<Vec<f64>>,
    /// Two coordinates per axis from classical MDS.
    pub layout: Vec<[f64; 2]>,
    pub dissimilarity: String,
    pub partial: Vec<PartialRow>,
}

impl GeometryReport {
    /// Cosine matrix as CSV with an `axis` header column.
    pub fn write_cosine_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["axis".to_string()];
        header.extend(self.axes.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.axes.iter().zip(&self.cosine) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|c| format!("{c:.9}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<geometry csv>", e))?;
        Ok(())
    }
}

/// Inter-axis cosines, a 2D MDS layout on 1 − cos, and partial ρ for every
/// ordinal axis that has labels.
///
/// For an ordinal axis, the partial ρ correlates label rank with the residual
/// of its projection after regressing out the projections (of the same
/// entities) onto every other axis.
pub fn axis_geometry(
    matrix: &EmbeddingMatrix,
    axes: &[Axis],
    labels: &[Option<&LabelSet>],
) -> Result<GeometryReport> {
    if axes.len() < 2 {
        return Err(Error::invalid("axis geometry needs at least two axes"));
    }
    if labels.len() != axes.len() {
        return Err(Error::invalid("one label slot per axis is required"));
    }
    for axis in axes {
        if axis.dim() != matrix.dim() {
            return Err(Error::DimensionMismatch {
                expected: matrix.dim(),
                actual: axis.dim(),
            });
        }
    }
    let k = axes.len();
    let mut cos = vec![vec![0.0; k]; k];
    for i in 0..k {
        cos[i][i] = 1.0;
        for j in (i + 1)..k {
            let c = cosine(&axes[i].direction, &axes[j].direction)?;
            cos[i][j] = c;
            cos[j][i] = c;
        }
    }
    let dissim: Vec<Vec<f64>> = cos.iter().map(|r| r.iter().map(|c| 1.0 - c).collect()).collect();
    let layout = classical_mds(&dissim, 2)?
        .into_iter()
        .map(|xy| [xy[0], xy[1]])
        .collect();

    let mut partial = Vec::new();
    for (i, (axis, lab)) in axes.iter().zip(labels).enumerate() {
        let Some(lab) = lab else { continue };
        if lab.kind != crate::corpus::LabelKind::Ordinal {
            continue;
        }
        let data = AxisData::from_labels(matrix, lab, AxisRecipe::new(AxisKind::OrdinalPole))?;
        let all = data.all();
        let own = data.project_items(matrix, axis, &all);
        let covariates: Vec<Vec<f64>> = axes
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, other)| data.project_items(matrix, other, &all))
            .collect();
        let residual = residualize(&own, &covariates)?;
        partial.push(PartialRow {
            axis: axis.name.clone(),
            n: data.len(),
            raw_rho: spearman(&data.values, &own)?.statistic,
            partial_rho: spearman(&data.values, &residual)?.statistic,
        });
    }
    Ok(GeometryReport {
        axes: axes.iter().map(|a| a.name.clone()).collect(),
        cosine: cos,
        layout,
        dissimilarity: "1 - cosine".to_string(),
        partial,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSimilarity {
    pub pairs: Vec<(i64, i64, f64)>,
    pub mean: f64,
    pub baseline: f64,
    pub baseline_pairs: usize,
    pub lift: f64,
    pub seed: u64,
}

/// Mean cosine over specified pairs against a baseline of 100 random pairs of
/// distinct entities per specified pair.
pub fn paired_similarity(matrix: &EmbeddingMatrix, pairs: &[(i64, i64)], seed: Seed) -> Result<PairedSimilarity> {
    if pairs.is_empty() {
        return Err(Error::invalid("no pairs given"));
    }
    if matrix.len() < 2 {
        return Err(Error::invalid("baseline needs at least two entities"));
    }
    let norms = row_norms(matrix)?;
    let sim = |a: usize, b: usize| cosine_with_norms(matrix.row(a), matrix.row(b), norms[a], norms[b]);
    let mut scored = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        let (ra, rb) = (matrix.require_id(a)?, matrix.require_id(b)?);
        scored.push((a, b, sim(ra, rb)));
    }
    let mean = scored.iter().map(|p| p.2).sum::<f64>() / scored.len() as f64;
    let count = pairs.len() * 100;
    let mut rng = seed.rng(0);
    let mut total = 0.0;
    for _ in 0..count {
        let a = rng.random_range(0..matrix.len());
        let mut b = rng.random_range(0..matrix.len() - 1);
        if b >= a {
            b += 1;
        }
        total += sim(a, b);
    }
    let baseline = total / count as f64;
    Ok(PairedSimilarity {
        pairs: scored,
        mean,
        baseline,
        baseline_pairs: count,
        lift: mean / baseline,
        seed: seed.master,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolePlane {
    pub savoury_centroid: [f64; 3],
    pub sweet_centroid: [f64; 3],
    /// Unit vector from the savoury centroid towards the sweet centroid.
    pub axis: [f64; 3],
    pub basis: [[f64; 3]; 2],
    pub along: Vec<(i64, f64)>,
    pub planar: Vec<(i64, [f64; 2])>,
}

fn centroid3(coords: &BTreeMap<i64, [f64; 3]>, ids: &[i64]) -> Result<[f64; 3]> {
    if ids.is_empty() {
        return Err(Error::invalid("empty pole"));
    }
    let mut c = [0.0; 3];
    for id in ids {
        let p = coords.get(id).ok_or(Error::UnknownId(*id))?;
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    Ok(c.map(|v| v / ids.len() as f64))
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Signed distance along the savoury → sweet centroid axis (savoury centroid
/// at 0) and coordinates in the perpendicular plane through the savoury
/// centroid.
///
/// The plane basis starts from the standard basis vector least aligned with
/// the axis, so it depends only on the centroids.
pub fn pole_plane_projection(
    coords: &BTreeMap<i64, [f64; 3]>,
    sweet: &[i64],
    savoury: &[i64],
) -> Result<PolePlane> {
    let cs = centroid3(coords, sweet)?;
    let cv = centroid3(coords, savoury)?;
    let diff = [cs[0] - cv[0], cs[1] - cv[1], cs[2] - cv[2]];
    let len = norm(&diff);
    if len <= f64::EPSILON * norm(&cs).max(norm(&cv)).max(1.0) {
        return Err(Error::degenerate("sweet and savoury centroids coincide"));
    }
    let u = diff.map(|v| v / len);
    let k = (0..3)
        .min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
        .expect("three components");
    let mut e = [0.0; 3];
    e[k] = 1.0;
    let proj = dot(&e, &u);
    let b1 = [e[0] - proj * u[0], e[1] - proj * u[1], e[2] - proj * u[2]];
    let b1n = norm(&b1);
    let b1 = b1.map(|v| v / b1n);
    let b2 = cross3(u, b1);
    let mut along = Vec::with_capacity(coords.len());
    let mut planar = Vec::with_capacity(coords.len());
    for (id, p) in coords {
        let rel = [p[0] - cv[0], p[1] - cv[1], p[2] - cv[2]];
        along.push((*id, dot(&rel, &u)));
        planar.push((*id, [dot(&rel, &b1), dot(&rel, &b2)]));
    }
    Ok(PolePlane {
        savoury_centroid: cv,
        sweet_centroid: cs,
        axis: u,
        basis: [b1, b2],
        along,
        planar,
    })
}

/// Reads 3D coordinates from CSV `id,x,y,z`.
pub fn read_coords_csv(reader: impl std::io::Read) -> Result<BTreeMap<i64, [f64; 3]>> {
    #[derive(Deserialize)]
    struct Row {
        id: i64,
        x: f64,
        y: f64,
        z: f64,
    }
    let mut out = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: Row = row?;
        if ![row.x, row.y, row.z].iter().all(|v| v.is_finite()) {
            return Err(Error::Format(format!("non-finite coordinate for id {}", row.id)));
        }
        if out.insert(row.id, [row.x, row.y, row.z]).is_some() {
            return Err(Error::DuplicateId(row.id));
        }
    }
    Ok(out)
}
