//! Small dense helpers shared by the solver, baselines and metrics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CcaError, Result};

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// Eigenvectors are the columns of the returned matrix.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(m.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Applies `f` to the eigenvalues of a symmetric matrix: `E f(L) E^T`.
pub fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen_desc(m);
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, j| {
        vectors[(i, j)] * f(values[j])
    });
    scaled * vectors.transpose()
}

/// Left singular vectors and singular values of a (typically tall) matrix.
///
/// Runs a QR factorization first and takes the SVD of the small triangular
/// factor, so the cost is linear in the row count. Singular values come back
/// in descending order.
pub fn thin_svd_left(z: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let (rows, cols) = z.shape();
    if rows == 0 || cols == 0 {
        return (DMatrix::zeros(rows, 0), DVector::zeros(0));
    }
    let qr = z.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let svd = r.svd(true, false);
    let u_small = svd.u.expect("requested left vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| svd.singular_values[i]));
    let mut u_sorted = DMatrix::zeros(u_small.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u_small.column(src));
    }
    (q * u_sorted, values)
}

/// Orthonormal basis for the column span of `m`.
///
/// Fails with [`CcaError::RankDeficientBasis`] when the columns are not
/// linearly independent to a relative tolerance of `1e-10`.
pub fn orthonormal_basis(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (basis, values) = thin_svd_left(m);
    let top = values.iter().copied().fold(0.0_f64, f64::max);
    if m.ncols() == 0 || m.ncols() > m.nrows() || top == 0.0 || !top.is_finite() {
        return Err(CcaError::RankDeficientBasis);
    }
    if values.iter().any(|&s| s <= 1e-10 * top) {
        return Err(CcaError::RankDeficientBasis);
    }
    Ok(basis)
}

/// `diag(weights) * m`.
pub fn scale_rows(m: &DMatrix<f64>, weights: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * weights[i])
}

/// Frobenius norm of `m^T m - I`.
pub fn identity_residual(gram: &DMatrix<f64>) -> f64 {
    let k = gram.nrows();
    (gram - DMatrix::<f64>::identity(k, k)).norm()
}
