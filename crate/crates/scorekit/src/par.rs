//! Chunked map with a sequential fallback.
//!
//! Every data-parallel computation in this crate is phrased as a map over
//! fixed-size index chunks whose results are merged in chunk order. Chunk
//! boundaries depend only on the input length, so results are bit-identical
//! with the `parallel` feature on or off and under any rayon pool size.

use std::ops::Range;

/// Default chunk length for data-parallel loops.
pub(crate) const CHUNK: usize = 8192;

pub(crate) fn chunk_ranges(n: usize, chunk: usize) -> Vec<Range<usize>> {
    assert!(chunk > 0);
    let mut out = Vec::with_capacity(n.div_ceil(chunk));
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        out.push(start..end);
        start = end;
    }
    out
}

/// Applies `f` to each chunk of `0..n` and returns the results in chunk
/// order. `f` receives the chunk index and its index range.
#[cfg(feature = "parallel")]
pub(crate) fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync,
{
    use rayon::prelude::*;
    let ranges = chunk_ranges(n, chunk);
    ranges
        .into_par_iter()
        .enumerate()
        .map(|(i, r)| f(i, r))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync,
{
    chunk_ranges(n, chunk)
        .into_iter()
        .enumerate()
        .map(|(i, r)| f(i, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_range_without_overlap() {
        let ranges = chunk_ranges(10, 3);
        assert_eq!(ranges, vec![0..3, 3..6, 6..9, 9..10]);
        assert!(chunk_ranges(0, 3).is_empty());
    }

    #[test]
    fn map_chunks_preserves_order() {
        let got = map_chunks(25, 4, |i, r| (i, r.start, r.end));
        let expect: Vec<_> = chunk_ranges(25, 4)
            .into_iter()
            .enumerate()
            .map(|(i, r)| (i, r.start, r.end))
            .collect();
        assert_eq!(got, expect);
    }
}
