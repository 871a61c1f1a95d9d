//! Small dense linear-algebra helpers shared by the graph, sampling and theory code.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Entries with magnitude at or below this are skipped when fixing eigenvector signs.
pub const SIGN_EPS: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-9;

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Full symmetric eigendecomposition with eigenvalues ascending.
///
/// Each eigenvector is flipped so that its first entry with magnitude above
/// [`SIGN_EPS`] is positive. Equal eigenvalues keep the solver's relative order.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::EigenNoConvergence(n))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let sign = col
            .iter()
            .find(|v| v.abs() > SIGN_EPS)
            .map_or(1.0, |v| v.signum());
        vectors.set_column(dst, &(col * sign));
    }
    Ok((values, vectors))
}

/// Symmetric eigenvalues only, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::EigenNoConvergence(n))?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(DVector::from_vec(v))
}

/// Inverse of a symmetric positive definite matrix via Cholesky, symmetrized.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = Cholesky::new(m.clone())?;
    let inv = chol.inverse();
    Some((&inv + inv.transpose()) * 0.5)
}

/// Largest absolute entry of `VᵀV − I`.
pub fn orthonormality_error(v: &DMatrix<f64>) -> f64 {
    let gram = v.transpose() * v;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// `Aᵀ diag(d) A` for a column vector of diagonal weights.
pub fn weighted_gram(a: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (i, &w) in d.iter().enumerate() {
        scaled.row_mut(i).scale_mut(w);
    }
    let g = a.transpose() * scaled;
    (&g + g.transpose()) * 0.5
}
