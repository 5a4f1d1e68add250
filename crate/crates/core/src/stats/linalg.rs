use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative threshold on |R_ii| below which the design is rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Ordinary least-squares residuals of `target` on an intercept plus
/// `covariates`.
pub fn residualize(target: &[f64], covariates: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = target.len();
    let p = covariates.len() + 1;
    if let Some(bad) = covariates.iter().find(|c| c.len() != n) {
        return Err(Error::invalid(format!(
            "covariate of length {} for target of length {n}",
            bad.len()
        )));
    }
    if n <= p {
        return Err(Error::invalid(format!(
            "{n} observations cannot support {} covariates plus an intercept",
            covariates.len()
        )));
    }
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { covariates[j - 1][i] });
    let y = DVector::from_column_slice(target);
    let qr = design.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..p).any(|i| r[(i, i)].abs() <= RANK_TOLERANCE * scale.max(1e-300)) {
        return Err(Error::degenerate("covariate design matrix is rank deficient"));
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::degenerate("singular triangular factor"))?;
    let fitted = design * beta;
    Ok((y - fitted).iter().copied().collect())
}

/// Classical (Torgerson) MDS of a symmetric dissimilarity matrix into `dims`
/// coordinates per point.
///
/// Negative eigenvalues are clamped to zero. Each axis is signed so its
/// largest-magnitude coordinate is positive, making the layout deterministic.
pub fn classical_mds(dissimilarity: &[Vec<f64>], dims: usize) -> Result<Vec<Vec<f64>>> {
    let k = dissimilarity.len();
    if k == 0 || dissimilarity.iter().any(|row| row.len() != k) {
        return Err(Error::invalid("dissimilarity matrix must be square and nonempty"));
    }
    let sq = DMatrix::from_fn(k, k, |i, j| dissimilarity[i][j].powi(2));
    let centering = DMatrix::identity(k, k) - DMatrix::from_element(k, k, 1.0 / k as f64);
    let b = -0.5 * &centering * sq * &centering;
    let b = (&b + b.transpose()) * 0.5;
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let mut coords = vec![vec![0.0; dims]; k];
    for (axis, &e) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[e].max(0.0);
        let v = eig.eigenvectors.column(e);
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (i, row) in coords.iter_mut().enumerate() {
            row[axis] = sign * v[i] * lambda.sqrt();
        }
    }
    Ok(coords)
}
