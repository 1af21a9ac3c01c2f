//! Rayon-backed [`Executor`].

use limitlab_core::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::Result;

/// Runs ensemble members on a private pool of `workers` threads. Results are collected
/// into index order, so outputs do not depend on the worker count.
pub struct PoolExecutor {
    pool: ThreadPool,
}

impl PoolExecutor {
    pub fn new(workers: usize) -> Result<Self> {
        let pool = ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for PoolExecutor {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
