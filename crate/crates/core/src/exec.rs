//! Scheduling abstraction for chunked Monte Carlo work.
//!
//! Work is always expressed as `len` independent tasks indexed `0..len`, and
//! results come back in index order, so output never depends on how an
//! executor schedules the tasks.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Number of workers this executor runs tasks on.
    fn workers(&self) -> usize;

    /// Evaluates `f(0), …, f(len − 1)` and returns the results in index order.
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every task on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn workers(&self) -> usize {
        1
    }

    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).map(f).collect()
    }
}
