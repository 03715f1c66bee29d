//! Accelerated alternating solver for the RMEN-CCA objective, in full-batch
//! and minibatch form.
//!
//! Each iteration builds the S-inverse operator and the row weights from the
//! current true pair, takes a momentum step on the unnormalized `U~`, whitens
//! it into `U`, then does the same for `V~` using the fresh `U`.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CcaError, Result};
use crate::linalg::sym_eigen_desc;
use crate::metrics::constraint_residual;
use crate::model::{
    validate_dataset, CanonicalPair, FitReport, Hyperparams, SolverState, Termination, TwoViewDataset,
};
use crate::parallel::{back_project, project};
use crate::regularizers::{build_s_inverse, l21_norm, nuclear_norm, row_weights, HQDiagonal, SInverseOperator};

/// Number of trailing iterations averaged by the convergence test.
pub const CONVERGENCE_WINDOW: usize = 5;
/// Abort when the objective exceeds this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Quantities frozen for one iteration, computed from the true pair.
#[derive(Debug, Clone)]
pub struct IterationContext {
    pub s_inv: SInverseOperator,
    /// Row weights for `U`.
    pub p: HQDiagonal,
    /// Row weights for `V`.
    pub q: HQDiagonal,
    /// Number of samples the context was built from.
    pub samples: usize,
}

/// Builds the context for views `x` (`d1 x m`) and `y` (`d2 x m`).
pub fn build_context(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    pair: &CanonicalPair,
    hp: &Hyperparams,
) -> Result<IterationContext> {
    let proj_x = project(x, &pair.u);
    let proj_y = project(y, &pair.v);
    Ok(IterationContext {
        s_inv: build_s_inverse(&proj_x, &proj_y, hp.zeta)?,
        p: row_weights(&pair.u, hp.zeta, hp.row_penalty)?,
        q: row_weights(&pair.v, hp.zeta, hp.row_penalty)?,
        samples: x.ncols(),
    })
}

/// RMEN-CCA objective with the exact (non-surrogate) norms:
/// `(1/2n)||X^T U - Y^T V||_F^2 + lambda1 (||U||_21 + ||V||_21) + lambda2 ||[X^T U, Y^T V]||_*`.
pub fn objective(ds: &TwoViewDataset, pair: &CanonicalPair, hp: &Hyperparams) -> Result<f64> {
    objective_on(ds.x.data(), ds.y.data(), pair, hp)
}

pub fn objective_on(x: &DMatrix<f64>, y: &DMatrix<f64>, pair: &CanonicalPair, hp: &Hyperparams) -> Result<f64> {
    check_pair_shapes(x, y, pair)?;
    let proj_x = project(x, &pair.u);
    let proj_y = project(y, &pair.v);
    Ok(objective_from_projections(&proj_x, &proj_y, pair, hp))
}

fn check_pair_shapes(x: &DMatrix<f64>, y: &DMatrix<f64>, pair: &CanonicalPair) -> Result<()> {
    if pair.u.nrows() != x.nrows() || pair.v.nrows() != y.nrows() || x.ncols() != y.ncols() {
        return Err(CcaError::DimensionMismatch(format!(
            "pair is {}x{} / {}x{}, views are {}x{} / {}x{}",
            pair.u.nrows(),
            pair.u.ncols(),
            pair.v.nrows(),
            pair.v.ncols(),
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(())
}

fn objective_from_projections(
    proj_x: &DMatrix<f64>,
    proj_y: &DMatrix<f64>,
    pair: &CanonicalPair,
    hp: &Hyperparams,
) -> f64 {
    let n = proj_x.nrows() as f64;
    let fit = (proj_x - proj_y).norm_squared() / (2.0 * n);
    let mut total = fit;
    if hp.lambda1 != 0.0 {
        total += hp.lambda1 * (l21_norm(&pair.u) + l21_norm(&pair.v));
    }
    if hp.lambda2 != 0.0 {
        let k = proj_x.ncols();
        let mut concat = DMatrix::zeros(proj_x.nrows(), 2 * k);
        concat.columns_mut(0, k).copy_from(proj_x);
        concat.columns_mut(k, k).copy_from(proj_y);
        total += hp.lambda2 * nuclear_norm(&concat);
    }
    total
}

/// Gradient of the context-frozen surrogate for one view:
/// `(1/m) A (A^T M~ - partner) + lambda1 W M~ + lambda2 A S^-1 A^T M~`.
fn view_gradient(
    view: &DMatrix<f64>,
    tilde: &DMatrix<f64>,
    partner_proj: &DMatrix<f64>,
    weights: &HQDiagonal,
    ctx: &IterationContext,
    hp: &Hyperparams,
) -> Result<DMatrix<f64>> {
    if view.nrows() != tilde.nrows() || partner_proj.nrows() != view.ncols() {
        return Err(CcaError::DimensionMismatch(format!(
            "view {}x{}, iterate {}x{}, partner projection {}x{}",
            view.nrows(),
            view.ncols(),
            tilde.nrows(),
            tilde.ncols(),
            partner_proj.nrows(),
            partner_proj.ncols()
        )));
    }
    let own_proj = project(view, tilde);
    let mut residual = (&own_proj - partner_proj) / view.ncols() as f64;
    if hp.lambda2 != 0.0 {
        residual += ctx.s_inv.apply(&own_proj)? * hp.lambda2;
    }
    let mut grad = back_project(view, &residual);
    if hp.lambda1 != 0.0 {
        grad += weights.apply(tilde) * hp.lambda1;
    }
    Ok(grad)
}

/// Gradient with respect to `U~`, using the state's current `V` as partner.
pub fn grad_u(
    ds: &TwoViewDataset,
    state: &SolverState,
    ctx: &IterationContext,
    hp: &Hyperparams,
) -> Result<DMatrix<f64>> {
    let partner = project(ds.y.data(), &state.pair.v);
    view_gradient(ds.x.data(), &state.u_tilde, &partner, &ctx.p, ctx, hp)
}

/// Gradient with respect to `V~`, using the state's current `U` as partner.
pub fn grad_v(
    ds: &TwoViewDataset,
    state: &SolverState,
    ctx: &IterationContext,
    hp: &Hyperparams,
) -> Result<DMatrix<f64>> {
    let partner = project(ds.x.data(), &state.pair.u);
    view_gradient(ds.y.data(), &state.v_tilde, &partner, &ctx.q, ctx, hp)
}

/// Context-frozen surrogate in `U~` whose gradient is exactly [`grad_u`]:
/// `(1/2n)||X^T U~ - Y^T V||^2 + (lambda1/2) Tr(U~^T P U~) + (lambda2/2) Tr(U~^T X S^-1 X^T U~)`.
pub fn frozen_surrogate_u(
    ds: &TwoViewDataset,
    state: &SolverState,
    ctx: &IterationContext,
    hp: &Hyperparams,
    u_tilde: &DMatrix<f64>,
) -> Result<f64> {
    let partner = project(ds.y.data(), &state.pair.v);
    frozen_surrogate(ds.x.data(), u_tilde, &partner, &ctx.p, ctx, hp)
}

/// The `V~` counterpart of [`frozen_surrogate_u`].
pub fn frozen_surrogate_v(
    ds: &TwoViewDataset,
    state: &SolverState,
    ctx: &IterationContext,
    hp: &Hyperparams,
    v_tilde: &DMatrix<f64>,
) -> Result<f64> {
    let partner = project(ds.x.data(), &state.pair.u);
    frozen_surrogate(ds.y.data(), v_tilde, &partner, &ctx.q, ctx, hp)
}

fn frozen_surrogate(
    view: &DMatrix<f64>,
    tilde: &DMatrix<f64>,
    partner_proj: &DMatrix<f64>,
    weights: &HQDiagonal,
    ctx: &IterationContext,
    hp: &Hyperparams,
) -> Result<f64> {
    let own = project(view, tilde);
    let fit = (&own - partner_proj).norm_squared() / (2.0 * view.ncols() as f64);
    let row = crate::regularizers::surrogate_penalty(tilde, weights)?;
    let nuclear = own.dot(&ctx.s_inv.apply(&own)?);
    Ok(fit + 0.5 * hp.lambda1 * row + 0.5 * hp.lambda2 * nuclear)
}

/// Heavy-ball update: `delta' = gamma delta - eta grad`, `m' = m + delta'`.
pub fn momentum_step(
    m_tilde: &DMatrix<f64>,
    delta: &DMatrix<f64>,
    grad: &DMatrix<f64>,
    hp: &Hyperparams,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let new_delta = delta * hp.gamma - grad * hp.eta;
    (m_tilde + &new_delta, new_delta)
}

/// `k x k` transform `T` with `T^T G T = I` for a PSD Gram `G = M~^T C M~`.
///
/// Eigenvalues below `zeta` times the largest are raised to that floor, so a
/// nearly rank-deficient iterate stays finite.
pub fn whitening_transform(gram: &DMatrix<f64>, zeta: f64) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen_desc(gram);
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(CcaError::NonFiniteIterate { iter: 0 });
    }
    if top <= f64::MIN_POSITIVE {
        return Err(CcaError::AllZeroInput);
    }
    let floor = zeta * top;
    let k = values.len();
    let scaled = DMatrix::from_fn(k, k, |i, j| vectors[(i, j)] / values[j].max(floor).sqrt());
    Ok(scaled * vectors.transpose())
}

/// Whitens `m_tilde` against a covariance: the result `W` satisfies
/// `W^T cov W = I` whenever `m_tilde^T cov m_tilde` is nonsingular.
pub fn normalize(m_tilde: &DMatrix<f64>, cov: &DMatrix<f64>, zeta: f64) -> Result<DMatrix<f64>> {
    if cov.nrows() != m_tilde.nrows() || cov.ncols() != m_tilde.nrows() {
        return Err(CcaError::DimensionMismatch(format!(
            "covariance {}x{} for a {}-row iterate",
            cov.nrows(),
            cov.ncols(),
            m_tilde.nrows()
        )));
    }
    let gram = m_tilde.tr_mul(&(cov * m_tilde));
    Ok(m_tilde * whitening_transform(&gram, zeta)?)
}

/// Whitens `m_tilde` against the sample covariance of `view` without
/// forming the `d x d` covariance.
pub fn normalize_on_view(m_tilde: &DMatrix<f64>, view: &DMatrix<f64>, zeta: f64) -> Result<DMatrix<f64>> {
    let proj = project(view, m_tilde);
    let gram = proj.tr_mul(&proj) / view.ncols() as f64;
    Ok(m_tilde * whitening_transform(&gram, zeta)?)
}

/// `(X^T U, Y^T V)`.
pub fn project_pair(pair: &CanonicalPair, ds: &TwoViewDataset) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_pair_shapes(ds.x.data(), ds.y.data(), pair)?;
    Ok((project(ds.x.data(), &pair.u), project(ds.y.data(), &pair.v)))
}

/// Owns one fit in progress.
pub struct Solver<'a> {
    ds: &'a TwoViewDataset,
    hp: Hyperparams,
    state: SolverState,
    rng: ChaCha8Rng,
}

impl<'a> Solver<'a> {
    /// Validates the inputs and draws a Gaussian initial pair, whitened on
    /// the full data so the first context comes from a feasible pair.
    pub fn new(ds: &'a TwoViewDataset, hp: &Hyperparams) -> Result<Self> {
        validate_dataset(ds, hp)?;
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let (d1, d2, k) = (ds.x.d(), ds.y.d(), hp.k);
        let u0 = DMatrix::from_fn(d1, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v0 = DMatrix::from_fn(d2, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let u = normalize_on_view(&u0, ds.x.data(), hp.zeta)?;
        let v = normalize_on_view(&v0, ds.y.data(), hp.zeta)?;
        Ok(Self {
            ds,
            hp: hp.clone(),
            state: SolverState::new(CanonicalPair { u, v }),
            rng,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SolverState {
        &mut self.state
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    /// Objective of the current true pair on the full data.
    pub fn current_objective(&self) -> Result<f64> {
        objective(self.ds, &self.state.pair, &self.hp)
    }

    fn update_u(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>, ctx: &IterationContext) -> Result<()> {
        let partner = project(y, &self.state.pair.v);
        let grad = view_gradient(x, &self.state.u_tilde, &partner, &ctx.p, ctx, &self.hp)?;
        let (u_tilde, delta) = momentum_step(&self.state.u_tilde, &self.state.delta_u, &grad, &self.hp);
        self.state.pair.u = self.guarded(normalize_on_view(&u_tilde, x, self.hp.zeta))?;
        self.state.u_tilde = u_tilde;
        self.state.delta_u = delta;
        Ok(())
    }

    fn update_v(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>, ctx: &IterationContext) -> Result<()> {
        let partner = project(x, &self.state.pair.u);
        let grad = view_gradient(y, &self.state.v_tilde, &partner, &ctx.q, ctx, &self.hp)?;
        let (v_tilde, delta) = momentum_step(&self.state.v_tilde, &self.state.delta_v, &grad, &self.hp);
        self.state.pair.v = self.guarded(normalize_on_view(&v_tilde, y, self.hp.zeta))?;
        self.state.v_tilde = v_tilde;
        self.state.delta_v = delta;
        Ok(())
    }

    fn guarded(&self, whitened: Result<DMatrix<f64>>) -> Result<DMatrix<f64>> {
        let iter = self.state.iter + 1;
        match whitened {
            Err(CcaError::NonFiniteIterate { .. }) => Err(CcaError::NonFiniteIterate { iter }),
            Ok(m) if m.iter().any(|v| !v.is_finite()) => Err(CcaError::NonFiniteIterate { iter }),
            other => other,
        }
    }

    /// One iteration on the given (sub)views; returns the objective of the
    /// updated pair on those views.
    fn iterate_on(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
        let ctx = build_context(x, y, &self.state.pair, &self.hp)?;
        self.update_u(x, y, &ctx)?;
        self.update_v(x, y, &ctx)?;
        self.state.iter += 1;
        let value = objective_on(x, y, &self.state.pair, &self.hp)?;
        if !value.is_finite() {
            return Err(CcaError::NonFiniteIterate { iter: self.state.iter });
        }
        self.state.objective_trace.push(value);
        Ok(value)
    }

    /// One full-batch iteration.
    pub fn step(&mut self) -> Result<f64> {
        let ds = self.ds;
        self.iterate_on(ds.x.data(), ds.y.data())
    }

    /// One iteration on a minibatch of `m` samples drawn without replacement.
    pub fn step_minibatch(&mut self, m: usize) -> Result<f64> {
        let n = self.ds.n();
        if m == 0 || m > n {
            return Err(CcaError::BatchTooLarge { m, n });
        }
        let mut picked = index::sample(&mut self.rng, n, m).into_vec();
        picked.sort_unstable();
        let x = self.ds.x.data().select_columns(&picked);
        let y = self.ds.y.data().select_columns(&picked);
        self.iterate_on(&x, &y)
    }

    /// Updates only `U~` and `U` with `V` held fixed.
    pub fn step_u_with_fixed_partner(&mut self) -> Result<()> {
        let ds = self.ds;
        let ctx = build_context(ds.x.data(), ds.y.data(), &self.state.pair, &self.hp)?;
        self.update_u(ds.x.data(), ds.y.data(), &ctx)
    }

    /// Re-whitens the current unnormalized pair on the full data.
    pub fn renormalize_full(&mut self) -> Result<()> {
        let ds = self.ds;
        self.state.pair.u = normalize_on_view(&self.state.u_tilde, ds.x.data(), self.hp.zeta)?;
        self.state.pair.v = normalize_on_view(&self.state.v_tilde, ds.y.data(), self.hp.zeta)?;
        Ok(())
    }

    pub fn into_state(self) -> SolverState {
        self.state
    }
}

fn converged(trace: &[f64], tol: f64) -> bool {
    if trace.len() <= CONVERGENCE_WINDOW {
        return false;
    }
    let tail = &trace[trace.len() - CONVERGENCE_WINDOW - 1..];
    let mean_change: f64 = tail
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / w[0].abs().max(f64::MIN_POSITIVE))
        .sum::<f64>()
        / CONVERGENCE_WINDOW as f64;
    mean_change < tol
}

fn run_loop(
    ds: &TwoViewDataset,
    hp: &Hyperparams,
    batch: Option<usize>,
    mut observer: impl FnMut(&SolverState),
) -> Result<FitReport> {
    let started = Instant::now();
    let mut solver = Solver::new(ds, hp)?;
    let initial = solver.current_objective()?;
    let limit = DIVERGENCE_FACTOR * initial.max(1e-8);
    let mut termination = Termination::MaxIters;
    for _ in 0..hp.max_iters {
        let value = match batch {
            Some(m) => solver.step_minibatch(m)?,
            None => solver.step()?,
        };
        if value > limit {
            return Err(CcaError::NonFiniteIterate { iter: solver.state.iter });
        }
        observer(&solver.state);
        if converged(&solver.state.objective_trace, hp.tol) {
            termination = Termination::Converged;
            break;
        }
    }
    if batch.is_some() {
        solver.renormalize_full()?;
    }
    let state = solver.into_state();
    let (res_u, res_v) = constraint_residual(&state.pair, ds);
    Ok(FitReport {
        iterations_run: state.objective_trace.len(),
        objective_trace: state.objective_trace,
        pair: state.pair,
        final_constraint_residual_u: res_u,
        final_constraint_residual_v: res_v,
        termination,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Full-batch fit.
pub fn fit_full(ds: &TwoViewDataset, hp: &Hyperparams) -> Result<FitReport> {
    fit_full_observed(ds, hp, |_| {})
}

/// [`fit_full`] with a callback after every iteration.
pub fn fit_full_observed(
    ds: &TwoViewDataset,
    hp: &Hyperparams,
    observer: impl FnMut(&SolverState),
) -> Result<FitReport> {
    if hp.batch_size.is_some() {
        return Err(CcaError::InvalidHyperparams(
            "fit_full does not take a batch size; use fit_stochastic".into(),
        ));
    }
    run_loop(ds, hp, None, observer)
}

/// Minibatch fit. Every per-iteration quantity comes from the minibatch;
/// a final full-data whitening restores the constraints exactly.
pub fn fit_stochastic(ds: &TwoViewDataset, hp: &Hyperparams) -> Result<FitReport> {
    fit_stochastic_observed(ds, hp, |_| {})
}

pub fn fit_stochastic_observed(
    ds: &TwoViewDataset,
    hp: &Hyperparams,
    observer: impl FnMut(&SolverState),
) -> Result<FitReport> {
    let m = hp
        .batch_size
        .ok_or_else(|| CcaError::InvalidHyperparams("fit_stochastic needs a batch size".into()))?;
    run_loop(ds, hp, Some(m), observer)
}

/// Dispatches on `hp.batch_size`.
pub fn fit(ds: &TwoViewDataset, hp: &Hyperparams) -> Result<FitReport> {
    match hp.batch_size {
        Some(_) => fit_stochastic(ds, hp),
        None => fit_full(ds, hp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ViewMatrix;

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn toy(seed: u64, n: usize, d1: usize, d2: usize) -> TwoViewDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = gaussian(2, n, &mut rng);
        let x = gaussian(d1, 2, &mut rng) * &z + gaussian(d1, n, &mut rng) * 0.5;
        let y = gaussian(d2, 2, &mut rng) * &z + gaussian(d2, n, &mut rng) * 0.5;
        TwoViewDataset::from_matrices(x, y).unwrap().center().unwrap()
    }

    #[test]
    fn objective_vanishes_for_zero_pair() {
        let ds = toy(1, 30, 4, 3);
        let pair = CanonicalPair::new(DMatrix::zeros(4, 2), DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(objective(&ds, &pair, &Hyperparams::with_k(2)).unwrap(), 0.0);
    }

    #[test]
    fn objective_vanishes_for_aligned_projections() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 0.5, 0.5, -1.0]);
        let ds = TwoViewDataset::from_matrices(x.clone(), x).unwrap();
        let u = DMatrix::from_row_slice(2, 1, &[0.3, -0.7]);
        let pair = CanonicalPair::new(u.clone(), u).unwrap();
        let hp = Hyperparams {
            lambda1: 0.0,
            lambda2: 0.0,
            ..Hyperparams::with_k(1)
        };
        assert_eq!(objective(&ds, &pair, &hp).unwrap(), 0.0);
    }

    #[test]
    fn objective_matches_term_sum() {
        let ds = toy(2, 25, 5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pair = CanonicalPair::new(gaussian(5, 2, &mut rng), gaussian(4, 2, &mut rng)).unwrap();
        let hp = Hyperparams {
            lambda1: 0.3,
            lambda2: 0.2,
            ..Hyperparams::with_k(2)
        };
        let a = ds.x.data().transpose() * &pair.u;
        let b = ds.y.data().transpose() * &pair.v;
        let mut concat = DMatrix::zeros(25, 4);
        concat.columns_mut(0, 2).copy_from(&a);
        concat.columns_mut(2, 2).copy_from(&b);
        let expected = (&a - &b).norm_squared() / 50.0
            + 0.3 * (l21_norm(&pair.u) + l21_norm(&pair.v))
            + 0.2 * concat.singular_values().sum();
        assert!((objective(&ds, &pair, &hp).unwrap() - expected).abs() < 1e-10);
        let wrong = CanonicalPair::new(gaussian(3, 2, &mut rng), gaussian(4, 2, &mut rng)).unwrap();
        assert!(matches!(objective(&ds, &wrong, &hp), Err(CcaError::DimensionMismatch(_))));
    }

    #[test]
    fn gradient_zero_at_aligned_residual() {
        let ds = toy(3, 20, 3, 3);
        let hp = Hyperparams {
            lambda1: 0.0,
            lambda2: 0.0,
            ..Hyperparams::with_k(1)
        };
        let solver = Solver::new(&ds, &hp).unwrap();
        let mut state = solver.state().clone();
        // Views share the same data so U~ = V gives X^T U~ = Y^T V.
        let same = TwoViewDataset::new(ds.x.clone(), ViewMatrix::new(ds.x.data().clone()).unwrap()).unwrap();
        state.pair.v = state.pair.u.clone();
        state.u_tilde = state.pair.u.clone();
        let ctx = build_context(same.x.data(), same.y.data(), &state.pair, &hp).unwrap();
        let g = grad_u(&same, &state, &ctx, &hp).unwrap();
        assert!(g.abs().max() < 1e-12);
    }

    #[test]
    fn gradient_pure_quadratic_when_partner_zero() {
        let ds = toy(4, 20, 4, 3);
        let hp = Hyperparams {
            lambda1: 0.0,
            lambda2: 0.0,
            ..Hyperparams::with_k(2)
        };
        let mut state = Solver::new(&ds, &hp).unwrap().state().clone();
        let ctx = build_context(ds.x.data(), ds.y.data(), &state.pair, &hp).unwrap();
        state.pair.v = DMatrix::zeros(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        state.u_tilde = gaussian(4, 2, &mut rng);
        let x = ds.x.data();
        let expected = x * x.transpose() * &state.u_tilde / 20.0;
        let g = grad_u(&ds, &state, &ctx, &hp).unwrap();
        assert!((g - expected).abs().max() < 1e-12);
    }

    #[test]
    fn momentum_examples() {
        let m = DMatrix::from_element(2, 1, 1.0);
        let d = DMatrix::from_element(2, 1, 0.5);
        let g = DMatrix::from_element(2, 1, 2.0);
        let plain = Hyperparams {
            gamma: 0.0,
            eta: 0.1,
            ..Hyperparams::default()
        };
        let (m1, _) = momentum_step(&m, &d, &g, &plain);
        assert!((m1 - (&m - &g * 0.1)).abs().max() < 1e-15);

        let coast = Hyperparams {
            gamma: 0.9,
            ..Hyperparams::default()
        };
        let (m2, d2) = momentum_step(&m, &d, &DMatrix::zeros(2, 1), &coast);
        assert!((m2 - (&m + &d * 0.9)).abs().max() < 1e-15);
        assert!((d2 - &d * 0.9).abs().max() < 1e-15);

        let hp = Hyperparams {
            gamma: 0.9,
            eta: 0.005,
            ..Hyperparams::default()
        };
        let zero = DMatrix::zeros(2, 1);
        let (a, da) = momentum_step(&zero, &zero, &g, &hp);
        let (b, _) = momentum_step(&a, &da, &g, &hp);
        assert!((&a + &g * 0.005).abs().max() < 1e-15);
        assert!((&b - &a + &g * (1.9 * 0.005)).abs().max() < 1e-15);
    }

    #[test]
    fn normalize_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cov = {
            let a = gaussian(10, 10, &mut rng);
            &a * a.transpose() / 10.0 + DMatrix::<f64>::identity(10, 10) * 0.1
        };
        let m = gaussian(10, 3, &mut rng);
        let w = normalize(&m, &cov, 1e-8).unwrap();
        let res = (w.transpose() * &cov * &w - DMatrix::<f64>::identity(3, 3)).norm();
        assert!(res < 1e-8, "residual {res}");
        // Already whitened input is a fixed point.
        let again = normalize(&w, &cov, 1e-8).unwrap();
        assert!((again - &w).abs().max() < 1e-8);

        // Scalar whitening removes a uniform scale.
        let q = crate::linalg::orthonormal_basis(&gaussian(6, 2, &mut rng)).unwrap();
        let w = normalize(&(&q * 2.0), &DMatrix::identity(6, 6), 1e-8).unwrap();
        let angles = crate::metrics::principal_angles(&w, &q).unwrap();
        assert!(angles.iter().all(|&a| a < 1e-10));
        assert!((w.transpose() * &w - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);

        assert!(matches!(
            normalize(&DMatrix::zeros(6, 2), &DMatrix::identity(6, 6), 1e-8),
            Err(CcaError::AllZeroInput)
        ));
    }

    #[test]
    fn fit_keeps_constraints_and_records_trace() {
        let ds = toy(7, 200, 5, 4);
        let hp = Hyperparams {
            max_iters: 40,
            ..Hyperparams::with_k(2)
        };
        let mut worst: f64 = 0.0;
        let report = fit_full_observed(&ds, &hp, |s| {
            let (ru, rv) = constraint_residual(&s.pair, &ds);
            worst = worst.max(ru).max(rv);
        })
        .unwrap();
        assert_eq!(report.objective_trace.len(), report.iterations_run);
        assert!(worst <= 1e-8 * 2.0, "worst residual {worst}");
        assert!(report.final_constraint_residual_u <= 1e-8 * 2.0);
    }

    #[test]
    fn fit_full_rejects_batch_size() {
        let ds = toy(8, 40, 3, 3);
        let hp = Hyperparams {
            batch_size: Some(10),
            ..Hyperparams::with_k(1)
        };
        assert!(matches!(fit_full(&ds, &hp), Err(CcaError::InvalidHyperparams(_))));
        let too_big = Hyperparams {
            batch_size: Some(41),
            ..Hyperparams::with_k(1)
        };
        assert!(matches!(fit_stochastic(&ds, &too_big), Err(CcaError::BatchTooLarge { .. })));
    }

    #[test]
    fn huge_learning_rate_is_reported() {
        let ds = toy(9, 60, 4, 4);
        let hp = Hyperparams {
            eta: 1e6,
            gamma: 0.9,
            max_iters: 200,
            ..Hyperparams::with_k(2)
        };
        assert!(matches!(fit_full(&ds, &hp), Err(CcaError::NonFiniteIterate { .. })));
    }

    #[test]
    fn convergence_window() {
        assert!(!converged(&[1.0, 1.0, 1.0], 1e-6));
        assert!(converged(&[1.0; 6], 1e-6));
        assert!(!converged(&[1.0, 0.9, 0.8, 0.7, 0.6, 0.5], 1e-6));
    }
}
