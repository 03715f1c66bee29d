//! Evaluation metrics: Pearson correlation of paired projections,
//! whitening-constraint residuals, principal angles, and trace checks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CcaError, Result};
use crate::linalg::{identity_residual, orthonormal_basis};
use crate::model::{CanonicalPair, TwoViewDataset};
use crate::parallel::project;

/// Per-dimension correlations and their mean as a percentage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PccReport {
    pub per_dimension: Vec<f64>,
    pub mean_pcc_percent: f64,
    /// Dimensions where one side had zero variance; they report 0.
    pub zero_variance: Vec<usize>,
}

/// Pearson correlation between matching columns of `a` and `b`.
pub fn pcc(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<PccReport> {
    if a.shape() != b.shape() {
        return Err(CcaError::DimensionMismatch(format!(
            "projections are {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if a.nrows() < 2 {
        return Err(CcaError::DegenerateInput("PCC needs at least 2 samples".into()));
    }
    if a.ncols() == 0 {
        return Err(CcaError::DegenerateInput("PCC needs at least 1 dimension".into()));
    }
    let mut per_dimension = Vec::with_capacity(a.ncols());
    let mut zero_variance = Vec::new();
    for j in 0..a.ncols() {
        let (ca, cb) = (a.column(j), b.column(j));
        let (ma, mb) = (ca.mean(), cb.mean());
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in ca.iter().zip(cb.iter()) {
            let (dx, dy) = (x - ma, y - mb);
            sab += dx * dy;
            saa += dx * dx;
            sbb += dy * dy;
        }
        if saa == 0.0 || sbb == 0.0 {
            zero_variance.push(j);
            per_dimension.push(0.0);
        } else {
            per_dimension.push((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0));
        }
    }
    let mean = per_dimension.iter().sum::<f64>() / per_dimension.len() as f64;
    Ok(PccReport {
        per_dimension,
        mean_pcc_percent: 100.0 * mean,
        zero_variance,
    })
}

/// `(||U^T (XX^T/n) U - I||_F, ||V^T (YY^T/n) V - I||_F)`.
pub fn constraint_residual(pair: &CanonicalPair, ds: &TwoViewDataset) -> (f64, f64) {
    let n = ds.n() as f64;
    let a = project(ds.x.data(), &pair.u);
    let b = project(ds.y.data(), &pair.v);
    (
        identity_residual(&(a.tr_mul(&a) / n)),
        identity_residual(&(b.tr_mul(&b) / n)),
    )
}

/// Principal angles between the column spans of `s1` and `s2`, ascending,
/// in radians.
///
/// Uses both cosines and sines of the angles so tiny angles keep full
/// relative accuracy.
pub fn principal_angles(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<Vec<f64>> {
    if s1.shape() != s2.shape() {
        return Err(CcaError::DimensionMismatch(format!(
            "bases are {}x{} and {}x{}",
            s1.nrows(),
            s1.ncols(),
            s2.nrows(),
            s2.ncols()
        )));
    }
    let q1 = orthonormal_basis(s1)?;
    let q2 = orthonormal_basis(s2)?;
    let cross = q1.tr_mul(&q2);
    let svd = cross.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right vectors");
    let residual = &q2 - &q1 * &cross;
    let mut angles: Vec<f64> = (0..svd.singular_values.len())
        .map(|i| {
            let z: DVector<f64> = v_t.row(i).transpose();
            let sin = (&residual * z).norm();
            sin.atan2(svd.singular_values[i])
        })
        .collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    Ok(angles)
}

/// True when no step of `trace` rises by more than `slack`.
pub fn is_non_increasing(trace: &[f64], slack: f64) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// Fraction of steps in `trace` that do not increase.
pub fn fraction_non_increasing(trace: &[f64], slack: f64) -> f64 {
    if trace.len() < 2 {
        return 1.0;
    }
    let good = trace.windows(2).filter(|w| w[1] <= w[0] + slack).count();
    good as f64 / (trace.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ViewMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn pcc_identity_and_negation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = gaussian(50, 3, &mut rng);
        let same = pcc(&a, &a).unwrap();
        assert!((same.mean_pcc_percent - 100.0).abs() < 1e-10);
        let neg = pcc(&a, &(-&a)).unwrap();
        assert!(neg.per_dimension.iter().all(|&r| (r + 1.0).abs() < 1e-12));
    }

    #[test]
    fn pcc_null_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let a = gaussian(n, 2, &mut rng);
        let b = gaussian(n, 2, &mut rng);
        let r = pcc(&a, &b).unwrap();
        assert!(r.mean_pcc_percent.abs() < 3.0 / (n as f64).sqrt() * 100.0);
    }

    #[test]
    fn pcc_errors_and_zero_variance() {
        let a = DMatrix::from_element(1, 2, 1.0);
        assert!(matches!(pcc(&a, &a), Err(CcaError::DegenerateInput(_))));
        assert!(matches!(
            pcc(&DMatrix::zeros(3, 2), &DMatrix::zeros(3, 1)),
            Err(CcaError::DimensionMismatch(_))
        ));
        let flat = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
        let ramp = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let r = pcc(&flat, &ramp).unwrap();
        assert_eq!(r.per_dimension, vec![0.0]);
        assert_eq!(r.zero_variance, vec![0]);
    }

    #[test]
    fn pcc_affine_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian(40, 2, &mut rng);
        let b = &a * 0.5 + gaussian(40, 2, &mut rng);
        let base = pcc(&a, &b).unwrap();
        let shifted = b.map(|v| 3.0 * v - 7.0);
        let moved = pcc(&a, &shifted).unwrap();
        for (x, y) in base.per_dimension.iter().zip(&moved.per_dimension) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    fn whitened_toy() -> (TwoViewDataset, CanonicalPair) {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = TwoViewDataset::new(
            ViewMatrix::new(gaussian(4, 30, &mut rng)).unwrap(),
            ViewMatrix::new(gaussian(3, 30, &mut rng)).unwrap(),
        )
        .unwrap();
        let u = crate::solver::normalize_on_view(&gaussian(4, 2, &mut rng), ds.x.data(), 1e-8).unwrap();
        let v = crate::solver::normalize_on_view(&gaussian(3, 2, &mut rng), ds.y.data(), 1e-8).unwrap();
        (ds, CanonicalPair { u, v })
    }

    #[test]
    fn residual_examples() {
        let (ds, pair) = whitened_toy();
        let (ru, rv) = constraint_residual(&pair, &ds);
        assert!(ru < 1e-8 && rv < 1e-8);

        let doubled = CanonicalPair {
            u: &pair.u * 2.0,
            v: pair.v.clone(),
        };
        let x = ds.x.data();
        let m = doubled.u.transpose() * x * x.transpose() * &doubled.u / 30.0;
        let expected = (m - DMatrix::<f64>::identity(2, 2)).norm();
        assert!((constraint_residual(&doubled, &ds).0 - expected).abs() < 1e-12);
        // Close to ||4I - I|| = 3 sqrt(2) since U was whitened.
        assert!((expected - 3.0 * 2f64.sqrt()).abs() < 1e-7);

        let zero = CanonicalPair {
            u: DMatrix::zeros(4, 2),
            v: DMatrix::zeros(3, 2),
        };
        let (zu, zv) = constraint_residual(&zero, &ds);
        assert!((zu - 2f64.sqrt()).abs() < 1e-15 && (zv - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn angles_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s1 = gaussian(6, 2, &mut rng);
        let mix = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -0.5, 3.0]);
        let same = principal_angles(&s1, &(&s1 * mix)).unwrap();
        assert!(same.iter().all(|&a| a < 1e-10), "{same:?}");

        let e = DMatrix::<f64>::identity(4, 4);
        let first = e.columns(0, 2).into_owned();
        let second = e.columns(2, 2).into_owned();
        let ortho = principal_angles(&first, &second).unwrap();
        assert!(ortho.iter().all(|&a| (a - std::f64::consts::FRAC_PI_2).abs() < 1e-12));

        let a = gaussian(5, 1, &mut rng);
        let b = gaussian(5, 1, &mut rng);
        let cos = (a.dot(&b) / (a.norm() * b.norm())).abs();
        let angle = principal_angles(&a, &b).unwrap()[0];
        assert!((angle - cos.acos()).abs() < 1e-10);
    }

    #[test]
    fn angles_are_symmetric_and_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = gaussian(7, 3, &mut rng);
        let b = gaussian(7, 3, &mut rng);
        let ab = principal_angles(&a, &b).unwrap();
        let ba = principal_angles(&b, &a).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            assert!((x - y).abs() < 1e-10);
        }
        let dependent = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
        assert!(matches!(
            principal_angles(&dependent, &gaussian(3, 2, &mut rng)),
            Err(CcaError::RankDeficientBasis)
        ));
    }

    #[test]
    fn trace_checks() {
        assert!(is_non_increasing(&[3.0, 2.0, 2.0, 1.0], 0.0));
        assert!(!is_non_increasing(&[3.0, 3.1], 1e-9));
        assert_eq!(fraction_non_increasing(&[3.0, 2.0, 2.5, 1.0, 0.5], 0.0), 0.75);
    }
}
