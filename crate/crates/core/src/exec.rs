//! Sample-level parallelism with an ordered, deterministic reduction.
//!
//! Every Monte Carlo loop in the crate goes through [`map_samples`]. Results
//! come back in sample-index order, so pooled statistics do not depend on the
//! worker count. Without the `parallel` feature everything runs sequentially.

/// How to run an embarrassingly parallel loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    /// Use the rayon pool when the `parallel` feature is enabled.
    #[default]
    Parallel,
    /// Plain iterator on the calling thread.
    Sequential,
}

/// Evaluate `f(0), ..., f(n-1)` and return the results in index order.
pub fn map_samples<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Fallible version of [`map_samples`]; the first error in index order wins.
pub fn try_map_samples<T, E, F>(exec: Execution, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_samples(exec, n, f).into_iter().collect()
}

/// Number of worker threads the parallel path will use.
pub fn worker_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
