//! Deterministic parallel map over path indices.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Evaluate `f(0..n)` on a pool of `workers` threads. Results come back in
/// index order, so any reduction done afterwards is independent of
/// scheduling.
pub fn par_map<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

/// As [`par_map`] for fallible tasks; the first error in index order wins.
pub fn try_par_map<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    par_map(n, workers, f)?.into_iter().collect()
}
