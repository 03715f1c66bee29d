//! Closed-form linear CCA (the reference solution for the unregularized
//! problem) and the configurations that turn the main solver into AppGrad
//! or MEN-CCA.

use nalgebra::{DMatrix, DVector};

use crate::error::{CcaError, Result};
use crate::linalg::sym_eigen_desc;
use crate::model::{CanonicalPair, Hyperparams, RowPenalty, TwoViewDataset};

/// Covariance eigenvalues below this count as singular when no ridge is used.
pub const SINGULAR_EIGENVALUE: f64 = 1e-12;

/// A canonical pair with its canonical correlations, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct CCASolution {
    pub pair: CanonicalPair,
    pub correlations: DVector<f64>,
}

/// `(cov + ridge I)^(-1/2)`, failing on a singular covariance without ridge.
fn inverse_root(cov: &DMatrix<f64>, ridge: f64, view: char) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen_desc(cov);
    let smallest = values.iter().copied().fold(f64::INFINITY, f64::min);
    if ridge == 0.0 && smallest < SINGULAR_EIGENVALUE {
        return Err(CcaError::SingularCovariance {
            view,
            eigenvalue: smallest,
        });
    }
    let d = values.len();
    let scaled = DMatrix::from_fn(d, d, |i, j| vectors[(i, j)] / (values[j].max(0.0) + ridge).sqrt());
    Ok(scaled * vectors.transpose())
}

/// Top-`k` CCA from covariance blocks: SVD of the whitened cross-covariance,
/// mapped back through the whitening transforms.
pub fn cca_from_covariances(
    cov_x: &DMatrix<f64>,
    cov_y: &DMatrix<f64>,
    cov_xy: &DMatrix<f64>,
    k: usize,
    ridge_x: f64,
    ridge_y: f64,
) -> Result<CCASolution> {
    let (d1, d2) = (cov_x.nrows(), cov_y.nrows());
    if cov_xy.shape() != (d1, d2) {
        return Err(CcaError::DimensionMismatch(format!(
            "cross-covariance is {}x{}, expected {d1}x{d2}",
            cov_xy.nrows(),
            cov_xy.ncols()
        )));
    }
    if k == 0 || k > d1.min(d2) {
        return Err(CcaError::RankBudgetTooLarge { k, limit: d1.min(d2) });
    }
    if !(ridge_x >= 0.0 && ridge_y >= 0.0) {
        return Err(CcaError::InvalidHyperparams("ridge must be non-negative".into()));
    }
    let wx = inverse_root(cov_x, ridge_x, 'x')?;
    let wy = inverse_root(cov_y, ridge_y, 'y')?;
    let t = &wx * cov_xy * &wy;
    let svd = t.svd(true, true);
    let left = svd.u.expect("requested left vectors");
    let right = svd.v_t.expect("requested right vectors").transpose();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut a = DMatrix::zeros(d1, k);
    let mut b = DMatrix::zeros(d2, k);
    let mut correlations = DVector::zeros(k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        a.set_column(dst, &left.column(src));
        b.set_column(dst, &right.column(src));
        correlations[dst] = svd.singular_values[src].clamp(0.0, 1.0);
    }
    Ok(CCASolution {
        pair: CanonicalPair {
            u: wx * a,
            v: wy * b,
        },
        correlations,
    })
}

fn covariances(ds: &TwoViewDataset) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = ds.n() as f64;
    let (x, y) = (ds.x.data(), ds.y.data());
    (x * x.transpose() / n, y * y.transpose() / n, x * y.transpose() / n)
}

/// Closed-form CCA on a centered dataset with the same ridge on both views.
pub fn cca_closed_form(ds: &TwoViewDataset, k: usize, ridge: f64) -> Result<CCASolution> {
    let (cx, cy, cxy) = covariances(ds);
    cca_from_covariances(&cx, &cy, &cxy, k, ridge, ridge)
}

/// `1e-8 * trace(cov) / d` for a covariance matrix.
pub fn default_ridge(cov: &DMatrix<f64>) -> f64 {
    1e-8 * cov.trace() / cov.nrows().max(1) as f64
}

/// Closed-form CCA with the default per-view ridge.
pub fn cca_closed_form_default(ds: &TwoViewDataset, k: usize) -> Result<CCASolution> {
    let (cx, cy, cxy) = covariances(ds);
    let (rx, ry) = (default_ridge(&cx), default_ridge(&cy));
    cca_from_covariances(&cx, &cy, &cxy, k, rx, ry)
}

/// Plain AppGrad: no regularizers, no momentum.
pub fn appgrad_config(hp: &Hyperparams) -> Hyperparams {
    Hyperparams {
        lambda1: 0.0,
        lambda2: 0.0,
        gamma: 0.0,
        ..hp.clone()
    }
}

/// MEN-CCA: the row penalty becomes a squared Frobenius norm.
pub fn men_cca_mode(hp: &Hyperparams) -> Hyperparams {
    Hyperparams {
        row_penalty: RowPenalty::Frobenius,
        ..hp.clone()
    }
}
