//! Parallel execution helpers.
//!
//! Replicate loops (bootstrap, Monte-Carlo studies) and per-period maps run
//! through [`map_indexed`], which dispatches to rayon when the `parallel`
//! feature is enabled and to a plain sequential loop otherwise. Results are
//! collected in index order either way, so output is identical across both
//! backends and across thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
