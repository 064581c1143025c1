//! Deterministic data-parallel helpers.
//!
//! With the `parallel` feature (the default) these fan work out over the
//! rayon thread pool; without it they run the identical closures
//! sequentially. Both paths produce bit-identical output because every
//! closure owns a disjoint output region addressed by index — no reduction
//! ever depends on scheduling order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to each consecutive `chunk_len`-sized chunk of `out`.
///
/// The closure receives the chunk index and the mutable chunk. The final
/// chunk may be shorter when `out.len()` is not a multiple of `chunk_len`.
///
/// # Panics
///
/// Panics if `chunk_len` is zero.
pub fn for_each_chunk_mut<T, F>(out: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk_len > 0, "chunk_len must be positive");
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, chunk)| f(i, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, chunk) in out.chunks_mut(chunk_len).enumerate() {
            f(i, chunk);
        }
    }
}

/// Builds a `Vec` of `n` elements where element `i` is `f(i)`.
///
/// Evaluation order is unspecified but the result is position-addressed, so
/// the output is independent of thread count.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Number of worker threads the helpers will use.
///
/// Reports the rayon pool size under the `parallel` feature and `1`
/// otherwise; useful for logging and benchmark labels.
pub fn worker_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
