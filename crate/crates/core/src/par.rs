//! Deterministic fan-out helper.
//!
//! Work is split into fixed-size chunks whose boundaries do not depend on
//! the number of worker threads, and chunk results are always combined in
//! chunk-index order. With the `parallel` feature the chunks run on the
//! ambient rayon pool; without it they run sequentially. Both paths perform
//! the exact same floating-point reductions, which is what makes results
//! bit-identical at any thread count.

use std::ops::Range;

/// Map `0..n` in chunks of `chunk_size`, returning per-chunk results in
/// chunk order.
pub fn chunked_map<T, F>(n: usize, chunk_size: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    assert!(chunk_size > 0);
    let ranges: Vec<Range<usize>> = (0..n)
        .step_by(chunk_size)
        .map(|start| start..(start + chunk_size).min(n))
        .collect();

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ranges.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ranges.into_iter().map(f).collect()
    }
}

/// Run `f` inside a dedicated worker pool of `n` threads (0 = default size).
/// Without the `parallel` feature the closure just runs inline.
#[cfg(feature = "parallel")]
pub fn with_thread_pool<R: Send>(n: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .expect("thread pool")
        .install(f)
}

#[cfg(not(feature = "parallel"))]
pub fn with_thread_pool<R>(_n: usize, f: impl FnOnce() -> R) -> R {
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covers_all_indices_in_order() {
        let chunks = chunked_map(10, 3, |r| r.collect::<Vec<_>>());
        let flat: Vec<usize> = chunks.into_iter().flatten().collect();
        assert_eq!(flat, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn empty_input() {
        let chunks = chunked_map(0, 4, |r| r.len());
        assert!(chunks.is_empty());
    }
}
