//! Indexed parallel map.
//!
//! Every ensemble loop in the crate goes through [`Executor::map_indexed`]. Results land
//! in slot `i` regardless of which worker produced them, and every reduction folds the
//! slots in index order, so outputs do not depend on the worker count.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Work unit size for chunked Monte Carlo loops. Fixed so that chunk boundaries (and
/// hence floating-point summation order) never depend on the executor.
pub const CHUNK: usize = 512;

pub(crate) fn chunk_count(total: usize) -> usize {
    total.div_ceil(CHUNK)
}

pub(crate) fn chunk_range(chunk: usize, total: usize) -> core::ops::Range<usize> {
    let start = chunk * CHUNK;
    start..(start + CHUNK).min(total)
}
