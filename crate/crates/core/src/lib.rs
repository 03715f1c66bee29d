//! Robust matrix elastic net canonical correlation analysis (RMEN-CCA).
//!
//! The crate fits paired linear projections of two data views with an
//! l21 + nuclear-norm penalty, using a momentum gradient scheme on an
//! unnormalized pair followed by exact whitening. Full-batch, minibatch and
//! kernel variants share one solver; closed-form CCA, AppGrad and MEN-CCA
//! are available as baselines.
//!
//! Matrices are stored features by samples, so a view `X` is `d x n` and
//! the projected samples are `X^T U`.

pub mod baselines;
pub mod data_io;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod pipeline;
pub mod regularizers;
pub mod solver;

pub use error::{CcaError, Result};
pub use model::{
    validate_dataset, CanonicalPair, FitReport, Hyperparams, RowPenalty, SolverState, Termination,
    TwoViewDataset, ViewMatrix,
};
