//! Trial-level data parallelism.
//!
//! With the `parallel` feature (on by default) [`map_trials`] fans the trial
//! indices out over the current rayon pool; without it, the sequential
//! fallback runs. Results are always collected in index order and reduced
//! sequentially afterwards, so outputs are bit-identical at any thread count.
//! [`map_trials_serial`] is always available for benchmarking the two paths
//! against each other.

#[cfg(feature = "parallel")]
pub fn map_trials<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_trials<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_trials_serial(n, f)
}

/// Sequential reference path, kept compiled under every feature set.
pub fn map_trials_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Install a global rayon pool with `threads` workers. No-op without the
/// `parallel` feature. Errors from re-initialization are ignored on purpose:
/// the pool can only be built once per process, and tests that probe thread
/// counts use scoped pools instead.
pub fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}
