//! Data-parallel helpers with a sequential fallback.
//!
//! All grid-level inner loops (Picard sweeps, quadratures, per-node field
//! assembly, per-epsilon defect evaluations) route through these helpers.
//! With the default `parallel` feature they dispatch to rayon; without it
//! the same call sites compile to plain sequential loops, which keeps the
//! numerical path identical (reductions are written so that the summation
//! order does not depend on the thread count — per-index results are
//! materialized and then folded sequentially).

/// Maps `0..n` through `f`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `0..n` through `f`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Deterministic sum of `f(i)` over `0..n`.
///
/// Results are materialized per index and folded in index order, so the
/// value is bit-identical between the parallel and sequential builds.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(n, f).into_iter().sum()
}

/// Deterministic max of `f(i)` over `0..n` (`-inf` when empty, NaN ignored).
pub fn max_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(n, f)
        .into_iter()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Installs a global thread pool sized from the `HYPERSHELL_THREADS`
/// environment variable, if set. No-op for the sequential build and when
/// the pool was already initialized.
pub fn init_thread_pool_from_env() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var("HYPERSHELL_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    // Ignore the error: the pool may already be built (e.g.
                    // repeated CLI invocations inside one test process).
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build_global();
                }
            }
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` threads (parallel build) or
/// directly (sequential build). Used by the benchmark suite to compare
/// thread counts inside one process.
#[cfg(feature = "parallel")]
pub fn run_with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool construction");
    pool.install(f)
}

/// Runs `f` on a dedicated pool of `threads` threads (parallel build) or
/// directly (sequential build). Used by the benchmark suite to compare
/// thread counts inside one process.
#[cfg(not(feature = "parallel"))]
pub fn run_with_threads<T: Send>(_threads: usize, f: impl FnOnce() -> T + Send) -> T {
    f()
}
