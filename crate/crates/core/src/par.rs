//! Execution strategy for the data-parallel inner loops.
//!
//! Every loop routed through here produces output that does not depend on
//! how work was split: results are collected in index order and partial
//! integer tallies are merged in chunk order.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, otherwise
    /// falls back to sequential evaluation.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Worker threads `exec` will use.
pub fn thread_count(exec: Exec) -> usize {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return rayon::current_num_threads();
    }
    let _ = exec;
    1
}

#[cfg(feature = "parallel")]
const MIN_ITEMS_PER_TASK: usize = 1024;

/// `(0..n).map(f).collect()`, possibly in parallel.
pub(crate) fn map_range<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .with_min_len(MIN_ITEMS_PER_TASK)
            .map(f)
            .collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Evaluates `f` on each chunk index and returns results in chunk order.
pub(crate) fn map_chunks<T, F>(exec: Exec, n_chunks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n_chunks).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n_chunks).map(f).collect()
}

/// Splits `0..n` into at most `parts` contiguous ranges of near-equal length.
pub(crate) fn split_ranges(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.clamp(1, n.max(1));
    let base = n / parts;
    let extra = n % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let len = base + usize::from(i < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_covers_range_exactly() {
        for n in [0, 1, 7, 100, 1001] {
            for parts in [1, 3, 8, 2000] {
                let r = split_ranges(n, parts);
                assert_eq!(r.first().unwrap().start, 0);
                assert_eq!(r.last().unwrap().end, n);
                for w in r.windows(2) {
                    assert_eq!(w[0].end, w[1].start);
                }
            }
        }
    }

    #[test]
    fn map_range_is_order_preserving() {
        let seq = map_range(Exec::Sequential, 5000, |i| i * i);
        let par = map_range(Exec::Parallel, 5000, |i| i * i);
        assert_eq!(seq, par);
    }
}
