//! Kernel RMEN-CCA. Each view's Gram matrix is handed to the linear solver
//! as an `n x n` feature matrix, and the dual coefficients `W` play the role
//! of `U` and `V`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CcaError, Result};
use crate::model::{FitReport, Hyperparams, TwoViewDataset, ViewMatrix};
use crate::parallel::map_range;
use crate::solver::fit_full;

/// Largest training set for which Gram matrices are built.
pub const MAX_KERNEL_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `exp(-||a - b||^2 / (2 width^2))`.
    Gaussian { width: f64 },
    Linear,
}

impl KernelKind {
    pub fn check(&self) -> Result<()> {
        match *self {
            KernelKind::Gaussian { width } if !(width > 0.0 && width.is_finite()) => {
                Err(CcaError::InvalidKernelParam(width))
            }
            _ => Ok(()),
        }
    }

    /// Kernel value between two points given as columns.
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelKind::Gaussian { width } => {
                let sq: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                (-sq / (2.0 * width * width)).exp()
            }
            KernelKind::Linear => a.iter().zip(b).map(|(p, q)| p * q).sum(),
        }
    }
}

/// Gram matrix of one view plus what is needed to evaluate it on new points.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    pub kind: KernelKind,
    /// Training view, `d x n`.
    pub train_points: DMatrix<f64>,
}

/// `K[i][j] = kernel(left_i, right_j)` for column-sample matrices.
pub fn cross_gram(kind: KernelKind, left: &DMatrix<f64>, right: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    kind.check()?;
    if left.nrows() != right.nrows() {
        return Err(CcaError::DimensionMismatch(format!(
            "points have {} and {} features",
            left.nrows(),
            right.nrows()
        )));
    }
    let (t, n) = (left.ncols(), right.ncols());
    let rows = map_range(t, |i| {
        let a = left.column(i);
        (0..n)
            .map(|j| kind.eval(a.as_slice(), right.column(j).as_slice()))
            .collect::<Vec<f64>>()
    });
    Ok(DMatrix::from_fn(t, n, |i, j| rows[i][j]))
}

pub fn gram(view: &ViewMatrix, kind: KernelKind) -> Result<GramMatrix> {
    let points = view.data().clone();
    let values = cross_gram(kind, &points, &points)?;
    Ok(GramMatrix {
        values,
        kind,
        train_points: points,
    })
}

/// Gaussian Gram matrix with the given width.
pub fn gram_gaussian(view: &ViewMatrix, width: f64) -> Result<GramMatrix> {
    gram(view, KernelKind::Gaussian { width })
}

/// `X^T X`.
pub fn gram_linear(view: &ViewMatrix) -> Result<GramMatrix> {
    gram(view, KernelKind::Linear)
}

/// Dual canonical coefficients with the Gram matrices they were fitted on.
#[derive(Debug, Clone)]
pub struct KernelModel {
    pub w_x: DMatrix<f64>,
    pub w_y: DMatrix<f64>,
    pub gram_x: GramMatrix,
    pub gram_y: GramMatrix,
}

/// Fits KRMEN-CCA by running the full-batch solver on `(K_X, K_Y)`.
///
/// Gram matrices are not centered in feature space. `hp.batch_size` is
/// ignored.
pub fn fit_kernel(
    ds: &TwoViewDataset,
    kind_x: KernelKind,
    kind_y: KernelKind,
    hp: &Hyperparams,
) -> Result<(KernelModel, FitReport)> {
    let n = ds.n();
    if n > MAX_KERNEL_SAMPLES {
        return Err(CcaError::TooLargeForKernel {
            n,
            limit: MAX_KERNEL_SAMPLES,
        });
    }
    if n < 2 {
        return Err(CcaError::DegenerateInput(format!("kernel fit needs at least 2 samples, got {n}")));
    }
    kind_x.check()?;
    kind_y.check()?;
    let gram_x = gram(&ds.x, kind_x)?;
    let gram_y = gram(&ds.y, kind_y)?;
    let dual = TwoViewDataset::new(
        ViewMatrix::new(gram_x.values.clone())?,
        ViewMatrix::new(gram_y.values.clone())?,
    )?;
    let hp = Hyperparams {
        batch_size: None,
        ..hp.clone()
    };
    let report = fit_full(&dual, &hp)?;
    let model = KernelModel {
        w_x: report.pair.u.clone(),
        w_y: report.pair.v.clone(),
        gram_x,
        gram_y,
    };
    Ok((model, report))
}

/// `(K_test,X W_X, K_test,Y W_Y)` where `K_test[i][j] = kernel(test_i, train_j)`.
pub fn project_kernel(
    model: &KernelModel,
    test_x: &ViewMatrix,
    test_y: &ViewMatrix,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if test_x.n() != test_y.n() {
        return Err(CcaError::SampleCountMismatch {
            x: test_x.n(),
            y: test_y.n(),
        });
    }
    let kx = cross_gram(model.gram_x.kind, test_x.data(), &model.gram_x.train_points)?;
    let ky = cross_gram(model.gram_y.kind, test_y.data(), &model.gram_y.train_points)?;
    Ok((kx * &model.w_x, ky * &model.w_y))
}
