//! Execution of independent per-client jobs.

use alloc::vec::Vec;

/// Runs `n` independent jobs and returns their results in job-index order.
///
/// Implementations may run jobs concurrently; callers rely only on the output
/// order, so results never depend on interleaving.
pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(job).collect()
    }
}
