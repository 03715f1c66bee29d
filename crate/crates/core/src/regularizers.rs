//! The l21 and nuclear norms, the half-quadratic row weights that stand in
//! for the l21 norm, and the factored `(M + zeta I)^(-1/2)` operator used by
//! the nuclear-norm gradient.

use nalgebra::{DMatrix, DVector};

use crate::error::{CcaError, Result};
use crate::linalg::thin_svd_left;
use crate::model::RowPenalty;

/// Sum of the Euclidean norms of the rows.
pub fn l21_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|row| row.norm()).sum()
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() > 2 * m.ncols() {
        // Tall input: singular values of the triangular QR factor.
        return m.clone().qr().r().singular_values().sum();
    }
    m.singular_values().sum()
}

/// Diagonal of the half-quadratic weight matrix for one projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HQDiagonal {
    pub weights: DVector<f64>,
    pub zeta: f64,
}

impl HQDiagonal {
    /// `diag(weights) * m`.
    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        crate::linalg::scale_rows(m, &self.weights)
    }
}

/// Per-row weights `1 / (2 sqrt(||row_i||^2 + zeta))`.
pub fn hq_diagonal(m: &DMatrix<f64>, zeta: f64) -> Result<HQDiagonal> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(CcaError::InvalidSmoothing(zeta));
    }
    let weights = DVector::from_iterator(
        m.nrows(),
        m.row_iter().map(|row| 0.5 / (row.norm_squared() + zeta).sqrt()),
    );
    Ok(HQDiagonal { weights, zeta })
}

/// Row weights for the given penalty: half-quadratic for l21, all ones for
/// the Frobenius (MEN-CCA) mode.
pub fn row_weights(m: &DMatrix<f64>, zeta: f64, penalty: RowPenalty) -> Result<HQDiagonal> {
    match penalty {
        RowPenalty::L21 => hq_diagonal(m, zeta),
        RowPenalty::Frobenius => {
            if !(zeta > 0.0 && zeta.is_finite()) {
                return Err(CcaError::InvalidSmoothing(zeta));
            }
            Ok(HQDiagonal {
                weights: DVector::from_element(m.nrows(), 1.0),
                zeta,
            })
        }
    }
}

/// `Tr(m^T diag(w) m)`.
pub fn surrogate_penalty(m: &DMatrix<f64>, hq: &HQDiagonal) -> Result<f64> {
    if hq.weights.len() != m.nrows() {
        return Err(CcaError::DimensionMismatch(format!(
            "{} weights for a matrix with {} rows",
            hq.weights.len(),
            m.nrows()
        )));
    }
    Ok(m
        .row_iter()
        .zip(hq.weights.iter())
        .map(|(row, w)| w * row.norm_squared())
        .sum())
}

/// Factored form of `(M + zeta I)^(-1/2)` for `M = A A^T + B B^T`.
///
/// `M` has rank at most `2k`, so the operator is a scaled identity plus a
/// correction on the span of `basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct SInverseOperator {
    /// `n x r` orthonormal eigenvectors of `M` with non-negligible eigenvalues.
    pub basis: DMatrix<f64>,
    /// `(sigma_i + zeta)^(-1/2)` for each retained eigenvalue `sigma_i`.
    pub scaled_eigs: DVector<f64>,
    /// `zeta^(-1/2)`, the action on the orthogonal complement.
    pub complement_scale: f64,
    pub n: usize,
}

/// Relative cutoff below which singular values of `[A B]` count as zero.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Builds the operator from the projections `A = X^T U` and `B = Y^T V`.
///
/// Eigenvalues of `M` are the squared singular values of the `n x 2k`
/// concatenation, so no `n x n` matrix is formed.
pub fn build_s_inverse(proj_x: &DMatrix<f64>, proj_y: &DMatrix<f64>, zeta: f64) -> Result<SInverseOperator> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(CcaError::InvalidSmoothing(zeta));
    }
    if proj_x.nrows() != proj_y.nrows() {
        return Err(CcaError::DimensionMismatch(format!(
            "projections have {} and {} rows",
            proj_x.nrows(),
            proj_y.nrows()
        )));
    }
    let n = proj_x.nrows();
    let kx = proj_x.ncols();
    let mut concat = DMatrix::zeros(n, kx + proj_y.ncols());
    concat.columns_mut(0, kx).copy_from(proj_x);
    concat.columns_mut(kx, proj_y.ncols()).copy_from(proj_y);

    let (left, singular) = thin_svd_left(&concat);
    let top = singular.iter().copied().fold(0.0_f64, f64::max);
    let rank = if top > 0.0 {
        singular.iter().take_while(|&&s| s > RANK_CUTOFF * top).count()
    } else {
        0
    };
    let basis = left.columns(0, rank).into_owned();
    let scaled_eigs = DVector::from_iterator(rank, singular.iter().take(rank).map(|s| 1.0 / (s * s + zeta).sqrt()));
    Ok(SInverseOperator {
        basis,
        scaled_eigs,
        complement_scale: 1.0 / zeta.sqrt(),
        n,
    })
}

impl SInverseOperator {
    pub fn rank(&self) -> usize {
        self.scaled_eigs.len()
    }

    /// `c m + Phi (diag(s) - c I) Phi^T m`, in `O(n c r)`.
    pub fn apply(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.n {
            return Err(CcaError::DimensionMismatch(format!(
                "operator acts on {} rows, got {}",
                self.n,
                m.nrows()
            )));
        }
        let mut out = m * self.complement_scale;
        if self.rank() > 0 {
            let mut coeffs = self.basis.tr_mul(m);
            for (i, mut row) in coeffs.row_iter_mut().enumerate() {
                row *= self.scaled_eigs[i] - self.complement_scale;
            }
            out += &self.basis * coeffs;
        }
        Ok(out)
    }
}

/// Free-function form of [`SInverseOperator::apply`].
pub fn apply_s_inverse(op: &SInverseOperator, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    op.apply(m)
}
