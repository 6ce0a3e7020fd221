//! Data-parallel helpers with a sequential fallback.
//!
//! Every parallel reduction in the crate goes through these helpers with a
//! fixed split structure, so results do not depend on the worker count or
//! on whether the `parallel` feature is enabled.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Execution {
    /// Rayon work stealing; equivalent to `Sequential` without the
    /// `parallel` feature.
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return rayon::join(a, b);
        }
        (a(), b())
    }

    /// `(0..n).map(f).collect()`, order preserved.
    pub fn map_indices<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Calls `f(chunk_index, chunk)` on consecutive `chunk_len` slices.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
            return;
        }
        data.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
    }

    /// Pairwise (tree) reduction of `map(i)` over `lo..hi`. The tree shape
    /// depends only on the range, never on scheduling.
    pub fn tree_reduce<T, M, R>(self, lo: usize, hi: usize, leaf: usize, map: &M, reduce: &R) -> T
    where
        T: Send,
        M: Fn(usize, usize) -> T + Sync,
        R: Fn(T, T) -> T + Sync,
    {
        if hi - lo <= leaf.max(1) {
            return map(lo, hi);
        }
        let mid = lo + (hi - lo) / 2;
        let (a, b) = self.join(
            || self.tree_reduce(lo, mid, leaf, map, reduce),
            || self.tree_reduce(mid, hi, leaf, map, reduce),
        );
        reduce(a, b)
    }
}

/// Pairwise sum of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
