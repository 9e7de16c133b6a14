//! Execution policy for the data-parallel loops.
//!
//! Every parallel loop in the crate is an indexed map whose results are
//! collected in index order, followed by a sequential fold. Work is split
//! into fixed-size blocks, so the floating-point reduction order depends only
//! on the input size, never on the thread count or the execution mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of units folded together before the ordered block reduction.
pub const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon-backed; falls back to sequential when the `parallel` feature is off.
    #[default]
    Parallel,
}

impl Execution {
    /// True when this policy actually runs on a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `f(0), f(1), .., f(len - 1)` in index order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Splits `0..len` into blocks of [`BLOCK`], evaluates `block(range)` per
    /// block and folds the partial results left to right with `merge`.
    pub fn block_reduce<T, F, M>(self, len: usize, block: F, merge: M) -> Option<T>
    where
        T: Send,
        F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
        M: FnMut(T, T) -> T,
    {
        let blocks = len.div_ceil(BLOCK);
        let parts = self.map(blocks, |b| {
            let start = b * BLOCK;
            block(start..(start + BLOCK).min(len))
        });
        parts.into_iter().reduce(merge)
    }
}
