//! Shared data types: views, paired datasets, canonical pairs,
//! hyperparameters and fit results.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CcaError, Result};

/// One view's feature matrix, `d` features by `n` samples.
///
/// Samples are columns, so projections onto a pair read `X^T U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatrix {
    data: DMatrix<f64>,
    feature_means: DVector<f64>,
    centered: bool,
}

impl ViewMatrix {
    /// Wraps a `d x n` matrix. Rejects empty shapes and non-finite entries.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        Self::check(&data, 'x')?;
        let d = data.nrows();
        Ok(Self {
            data,
            feature_means: DVector::zeros(d),
            centered: false,
        })
    }

    /// Builds a view from samples given row-wise (`n x d`), transposing to
    /// the internal features-by-samples layout.
    pub fn from_samples(samples: &DMatrix<f64>) -> Result<Self> {
        Self::new(samples.transpose())
    }

    fn check(data: &DMatrix<f64>, view: char) -> Result<()> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(CcaError::DegenerateInput(format!(
                "view {view} has shape {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        for col in 0..data.ncols() {
            for row in 0..data.nrows() {
                if !data[(row, col)].is_finite() {
                    return Err(CcaError::NonFiniteEntry { view, row, col });
                }
            }
        }
        Ok(())
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn feature_means(&self) -> &DVector<f64> {
        &self.feature_means
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Number of features.
    pub fn d(&self) -> usize {
        self.data.nrows()
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    /// Subtracts per-feature means. Needs at least two samples.
    ///
    /// The returned `feature_means` accumulate across repeated calls, so
    /// [`ViewMatrix::uncentered`] always restores the original data.
    pub fn center(&self) -> Result<Self> {
        if self.n() < 2 {
            return Err(CcaError::DegenerateInput(format!(
                "centering needs at least 2 samples, got {}",
                self.n()
            )));
        }
        let means = self.data.column_mean();
        let mut data = self.data.clone();
        for mut col in data.column_iter_mut() {
            col -= &means;
        }
        Ok(Self {
            data,
            feature_means: &self.feature_means + means,
            centered: true,
        })
    }

    /// Centers with externally supplied means, e.g. test samples with the
    /// training means.
    pub fn center_with(&self, means: &DVector<f64>) -> Result<Self> {
        if means.len() != self.d() {
            return Err(CcaError::DimensionMismatch(format!(
                "{} means for a view with {} features",
                means.len(),
                self.d()
            )));
        }
        let mut data = self.data.clone();
        for mut col in data.column_iter_mut() {
            col -= means;
        }
        Ok(Self {
            data,
            feature_means: &self.feature_means + means,
            centered: true,
        })
    }

    /// Adds the stored means back.
    pub fn uncentered(&self) -> DMatrix<f64> {
        let mut data = self.data.clone();
        for mut col in data.column_iter_mut() {
            col += &self.feature_means;
        }
        data
    }

    /// Keeps the samples at `indices`, in the given order.
    pub fn select_samples(&self, indices: &[usize]) -> Self {
        Self {
            data: self.data.select_columns(indices),
            feature_means: self.feature_means.clone(),
            centered: self.centered,
        }
    }

    /// Appends extra feature rows below the existing ones.
    pub fn stack_features(&self, extra: &DMatrix<f64>) -> Result<Self> {
        if extra.ncols() != self.n() {
            return Err(CcaError::DimensionMismatch(format!(
                "{} extra samples for a view with {}",
                extra.ncols(),
                self.n()
            )));
        }
        let mut data = DMatrix::zeros(self.d() + extra.nrows(), self.n());
        data.rows_mut(0, self.d()).copy_from(&self.data);
        data.rows_mut(self.d(), extra.nrows()).copy_from(extra);
        Self::new(data)
    }
}

/// Two views with paired samples: column `j` of `x` belongs with column `j` of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoViewDataset {
    pub x: ViewMatrix,
    pub y: ViewMatrix,
}

impl TwoViewDataset {
    pub fn new(x: ViewMatrix, y: ViewMatrix) -> Result<Self> {
        if x.n() != y.n() {
            return Err(CcaError::SampleCountMismatch { x: x.n(), y: y.n() });
        }
        Ok(Self { x, y })
    }

    pub fn from_matrices(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        let x = ViewMatrix::new(x)?;
        let y = ViewMatrix::new(y).map_err(|e| match e {
            CcaError::NonFiniteEntry { row, col, .. } => CcaError::NonFiniteEntry { view: 'y', row, col },
            other => other,
        })?;
        Self::new(x, y)
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn center(&self) -> Result<Self> {
        Ok(Self {
            x: self.x.center()?,
            y: self.y.center()?,
        })
    }

    /// Centers both views with the training means of `reference`.
    pub fn center_like(&self, reference: &TwoViewDataset) -> Result<Self> {
        Ok(Self {
            x: self.x.center_with(reference.x.feature_means())?,
            y: self.y.center_with(reference.y.feature_means())?,
        })
    }

    pub fn select_samples(&self, indices: &[usize]) -> Self {
        Self {
            x: self.x.select_samples(indices),
            y: self.y.select_samples(indices),
        }
    }
}

/// Projection matrices `U` (`d1 x k`) and `V` (`d2 x k`).
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPair {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl CanonicalPair {
    pub fn new(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != v.ncols() || u.ncols() == 0 {
            return Err(CcaError::DimensionMismatch(format!(
                "U has {} columns, V has {}",
                u.ncols(),
                v.ncols()
            )));
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(CcaError::DegenerateInput("canonical pair has non-finite entries".into()));
        }
        Ok(Self { u, v })
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }
}

/// How rows of the projection matrices are penalized by the `lambda1` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowPenalty {
    /// Half-quadratic l21 reweighting.
    #[default]
    L21,
    /// Unit weights, i.e. a squared Frobenius penalty (MEN-CCA).
    Frobenius,
}

/// Solver settings. Defaults follow the published experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// l21 weight.
    pub lambda1: f64,
    /// Nuclear-norm weight.
    pub lambda2: f64,
    /// Learning rate.
    pub eta: f64,
    /// Momentum coefficient in `[0, 1)`.
    pub gamma: f64,
    /// Smoothing perturbation for the reweighting and the S-inverse.
    pub zeta: f64,
    pub k: usize,
    pub max_iters: usize,
    /// Relative objective change threshold, averaged over a short window.
    pub tol: f64,
    /// Minibatch size; `Some` selects the stochastic solver.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub row_penalty: RowPenalty,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda1: 0.01,
            lambda2: 0.001,
            eta: 0.005,
            gamma: 0.9,
            zeta: 1e-8,
            k: 1,
            max_iters: 150,
            tol: 1e-6,
            batch_size: None,
            seed: 0,
            row_penalty: RowPenalty::L21,
        }
    }
}

impl Hyperparams {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    /// Checks the scalar ranges that do not depend on a dataset.
    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(CcaError::InvalidHyperparams(what.to_string()));
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return bad("lambda1 must be a finite non-negative number");
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return bad("lambda2 must be a finite non-negative number");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(CcaError::InvalidSmoothing(self.zeta));
        }
        if self.k == 0 {
            return bad("k must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be positive");
        }
        Ok(())
    }
}

/// Checks that a dataset and a hyperparameter set can be fitted together.
pub fn validate_dataset(ds: &TwoViewDataset, hp: &Hyperparams) -> Result<()> {
    check_shapes(ds.x.d(), ds.y.d(), ds.x.n(), ds.y.n(), hp)?;
    for (view, m) in [('x', ds.x.data()), ('y', ds.y.data())] {
        for col in 0..m.ncols() {
            for row in 0..m.nrows() {
                if !m[(row, col)].is_finite() {
                    return Err(CcaError::NonFiniteEntry { view, row, col });
                }
            }
        }
    }
    Ok(())
}

/// The shape-only part of [`validate_dataset`].
pub fn check_shapes(d1: usize, d2: usize, n_x: usize, n_y: usize, hp: &Hyperparams) -> Result<()> {
    if n_x != n_y {
        return Err(CcaError::SampleCountMismatch { x: n_x, y: n_y });
    }
    hp.check()?;
    let limit = d1.min(d2).min(n_x);
    if hp.k > limit {
        return Err(CcaError::RankBudgetTooLarge { k: hp.k, limit });
    }
    if let Some(m) = hp.batch_size {
        if m == 0 || m > n_x {
            return Err(CcaError::BatchTooLarge { m, n: n_x });
        }
    }
    Ok(())
}

/// Mutable state of one fit in progress.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub u_tilde: DMatrix<f64>,
    pub v_tilde: DMatrix<f64>,
    pub delta_u: DMatrix<f64>,
    pub delta_v: DMatrix<f64>,
    pub pair: CanonicalPair,
    pub iter: usize,
    pub objective_trace: Vec<f64>,
}

impl SolverState {
    /// Zero unnormalized pair and momentum around an initial true pair.
    pub fn new(pair: CanonicalPair) -> Self {
        let (d1, k) = pair.u.shape();
        let d2 = pair.v.nrows();
        Self {
            u_tilde: DMatrix::zeros(d1, k),
            v_tilde: DMatrix::zeros(d2, k),
            delta_u: DMatrix::zeros(d1, k),
            delta_v: DMatrix::zeros(d2, k),
            pair,
            iter: 0,
            objective_trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIters,
}

/// Result of a fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub pair: CanonicalPair,
    pub iterations_run: usize,
    pub objective_trace: Vec<f64>,
    pub final_constraint_residual_u: f64,
    pub final_constraint_residual_v: f64,
    pub termination: Termination,
    pub wall_seconds: f64,
}
