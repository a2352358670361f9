//! Data-parallel map helpers with a sequential fallback.
//!
//! Fit iterations and sweep values are independent, so they run through these
//! helpers: with the `parallel` feature they fan out over rayon, without it
//! they run in a plain loop. Outputs are index-ordered either way, so results
//! never depend on scheduling. Worker count is controlled only through the
//! `RAYON_NUM_THREADS` environment variable.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Map `f` over a slice, collecting results in input order.
#[cfg(feature = "parallel")]
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Map `f` over a slice, collecting results in input order.
#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// "parallel" or "sequential", for bench and run-header labeling.
pub const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};
