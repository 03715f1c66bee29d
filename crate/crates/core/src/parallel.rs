//! Data-parallel kernels with a sequential fallback.
//!
//! With the `parallel` feature the sample axis is split into fixed-size
//! blocks that rayon processes concurrently. Reductions always combine the
//! block partials in block order, so results are bitwise identical with or
//! without the feature and for any thread count.

use nalgebra::DMatrix;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Samples per block for the blocked products.
pub const SAMPLE_BLOCK: usize = 1024;

fn blocks(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .step_by(SAMPLE_BLOCK)
        .map(|start| (start, SAMPLE_BLOCK.min(n - start)))
        .collect()
}

/// Maps `f` over `0..n`, in parallel when the feature is enabled.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Computes `view^T * m` for a `d x n` view and `d x k` matrix, giving `n x k`.
pub fn project(view: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = view.ncols();
    let k = m.ncols();
    if n <= SAMPLE_BLOCK {
        return view.tr_mul(m);
    }
    let parts = map_range(blocks(n).len(), |b| {
        let (start, len) = blocks(n)[b];
        (start, view.columns(start, len).tr_mul(m))
    });
    let mut out = DMatrix::zeros(n, k);
    for (start, part) in parts {
        out.rows_mut(start, part.nrows()).copy_from(&part);
    }
    out
}

/// Computes `view * r` for a `d x n` view and `n x k` matrix, giving `d x k`.
///
/// The sum over samples is accumulated block by block in a fixed order.
pub fn back_project(view: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = view.ncols();
    if n <= SAMPLE_BLOCK {
        return view * r;
    }
    let spans = blocks(n);
    let parts = map_range(spans.len(), |b| {
        let (start, len) = spans[b];
        view.columns(start, len) * r.rows(start, len)
    });
    let mut iter = parts.into_iter();
    let mut acc = iter.next().expect("at least one block");
    for part in iter {
        acc += part;
    }
    acc
}
