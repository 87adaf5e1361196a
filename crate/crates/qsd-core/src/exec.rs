//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the loops below fan out through
//! rayon; without it they run as plain iterators. Both paths produce
//! bitwise-identical results: work is split at fixed indices and reduced in
//! index order, never in completion order, so reproducibility does not
//! depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Map fixed-size chunks of `items` (last chunk may be short) and fold the
/// chunk results in chunk order.
pub fn chunked_fold<I, A, M, F>(items: &[I], chunk: usize, map: M, mut fold: F, init: A) -> A
where
    I: Sync,
    A: Send,
    M: Fn(&[I]) -> A + Sync + Send,
    F: FnMut(A, A) -> A,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    let parts: Vec<A> = items.par_chunks(chunk).map(map).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<A> = items.chunks(chunk).map(map).collect();
    let mut acc = init;
    for p in parts {
        acc = fold(acc, p);
    }
    acc
}
