use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use shm_locate_core::Executor;

pub const THREADS_ENV: &str = "SHM_LOCATE_THREADS";

/// Executor backed by a dedicated rayon pool. Results come back in index order.
pub struct RayonExecutor {
    pool: ThreadPool,
}

impl RayonExecutor {
    /// `threads = 0` lets rayon pick.
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(RayonExecutor { pool })
    }

    /// Thread cap from `SHM_LOCATE_THREADS`; unset or unparsable means auto.
    pub fn from_env() -> Result<Self, rayon::ThreadPoolBuildError> {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(0);
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<R: Send, F: Fn(usize) -> R + Sync + Send>(&self, n: usize, job: F) -> Vec<R> {
        self.pool.install(|| (0..n).into_par_iter().map(&job).collect())
    }
}
