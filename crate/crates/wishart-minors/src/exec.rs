//! Thread-pool [`Executor`] for the core's chunked Monte Carlo work.

use rayon::prelude::*;
use wishart_minors_core::Executor;

/// Runs tasks on a dedicated rayon pool with a fixed number of workers.
pub struct ThreadPool {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl ThreadPool {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("wishart-minors-{i}"))
            .build()
            .expect("failed to start worker threads");
        Self { pool, workers }
    }

    /// One worker per available CPU.
    pub fn with_available_parallelism() -> Self {
        Self::new(default_workers())
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl Executor for ThreadPool {
    fn workers(&self) -> usize {
        self.workers
    }

    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..len).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use wishart_minors_core::Sequential;

    #[test]
    fn preserves_index_order() {
        let pool = ThreadPool::new(4);
        let got = pool.map(1000, |i| i * i);
        assert_eq!(got, Sequential.map(1000, |i| i * i));
        assert_eq!(pool.workers(), 4);
    }
}
