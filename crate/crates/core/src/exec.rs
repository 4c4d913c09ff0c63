use alloc::vec::Vec;

/// Runs independent indexed jobs and returns their results in index order.
///
/// Implementations may evaluate jobs concurrently, but the returned vector must
/// always be ordered by job index so callers stay deterministic.
pub trait Executor: Sync {
    fn map<R, F>(&self, n: usize, job: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<R, F>(&self, n: usize, job: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).map(job).collect()
    }
}
