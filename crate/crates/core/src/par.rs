//! Data-parallel helpers.
//!
//! Every batch loop in the crate (Gram-matrix evaluation, ensemble cases,
//! per-time matrix exponentials) goes through [`map_range`]. With the
//! `parallel` feature enabled the work is spread over the rayon pool;
//! without it, or when [`Execution::Sequential`] is requested, it runs on the
//! calling thread. Results are always returned in index order, so output is
//! identical either way.

/// How a batch of independent evaluations is scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Execution {
    /// Run on the calling thread, in index order.
    Sequential,
    /// Run on the rayon pool when the `parallel` feature is enabled.
    #[default]
    Parallel,
}

impl Execution {
    /// True when this mode actually fans out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0), f(1), ..., f(len - 1)` and collects the results in order.
pub fn map_range<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec == Execution::Parallel && len > 1 {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..len).map(f).collect()
}
