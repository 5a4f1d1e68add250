use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine with both norms already known and nonzero.
#[inline]
pub fn cosine_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Row norms, failing on the first zero vector in id order.
pub fn row_norms(matrix: &EmbeddingMatrix) -> Result<Vec<f64>> {
    let norms: Vec<f64> = matrix.rows().map(norm).collect();
    if let Some(row) = matrix
        .rows_by_id()
        .into_iter()
        .find(|&r| norms[r] == 0.0)
    {
        return Err(Error::ZeroNorm(matrix.entity(row).id));
    }
    Ok(norms)
}

/// Arithmetic mean of the given rows.
pub fn centroid(matrix: &EmbeddingMatrix, rows: &[usize]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::degenerate("centroid of an empty set"));
    }
    let mut sum = vec![0.0; matrix.dim()];
    for &r in rows {
        for (s, v) in sum.iter_mut().zip(matrix.row(r)) {
            *s += v;
        }
    }
    let n = rows.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// All unordered entity pairs with their cosine similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    pub rows: Vec<PairRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRow {
    pub id_a: i64,
    pub id_b: i64,
    pub cosine: f64,
}

impl PairTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id_a", "id_b", "cosine"])?;
        for row in &self.rows {
            w.write_record([
                row.id_a.to_string(),
                row.id_b.to_string(),
                format!("{:.9}", row.cosine),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<pair table>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Computes every pair (id_a < id_b) ordered lexicographically by ids.
pub fn pairwise(matrix: &EmbeddingMatrix) -> Result<PairTable> {
    let norms = row_norms(matrix)?;
    let order = matrix.rows_by_id();
    let n = order.len();
    let chunks: Vec<Vec<PairRow>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ra = order[i];
            let a = matrix.row(ra);
            let id_a = matrix.entity(ra).id;
            ((i + 1)..n)
                .map(|j| {
                    let rb = order[j];
                    PairRow {
                        id_a,
                        id_b: matrix.entity(rb).id,
                        cosine: cosine_with_norms(a, matrix.row(rb), norms[ra], norms[rb]),
                    }
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for chunk in chunks {
        rows.extend(chunk);
    }
    Ok(PairTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Entity;

    fn matrix(rows: Vec<Vec<f64>>) -> EmbeddingMatrix {
        let entities = (0..rows.len())
            .map(|i| Entity::new(i as i64 * 3 + 1, format!("e{i}")))
            .collect();
        EmbeddingMatrix::new(entities, rows).unwrap()
    }

    #[test]
    fn cosine_basics() {
        let v = [0.3, -1.2, 4.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((cosine(&v, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pair_counts_small() {
        assert_eq!(pairwise(&matrix(vec![vec![1.0, 2.0]])).unwrap().len(), 0);
        let t = pairwise(&matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t.rows[0].id_a, t.rows[0].id_b), (1, 4));
    }

    #[test]
    fn zero_vector_reports_id() {
        let err = pairwise(&matrix(vec![vec![1.0, 0.0], vec![0.0, 0.0]])).unwrap_err();
        assert!(matches!(err, Error::ZeroNorm(4)));
    }

    #[test]
    fn csv_uses_nine_decimals() {
        let t = pairwise(&matrix(vec![vec![1.0, 0.0], vec![1.0, 1.0]])).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id_a,id_b,cosine\n1,4,0.707106781\n");
    }
}
