//! Deterministic parallelism helpers.
//!
//! Reductions over floats are not associative, so naive work-stealing sums
//! change with the thread count. Everything here reduces through a tree whose
//! shape depends only on the input length: leaves are fixed-size chunks
//! summed sequentially (with Kahan compensation), internal nodes always split
//! at the midpoint. `rayon::join` may execute the two halves on any threads
//! in any order; the combine order is fixed, so results are bit-identical for
//! every `--threads` setting.

/// Leaf size below which a range is summed sequentially.
const LEAF: usize = 1024;

/// Compensated (Kahan) sequential sum.
pub fn kahan_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Fixed-shape pairwise sum of a slice.
pub fn tree_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        return kahan_sum(xs);
    }
    let mid = xs.len() / 2;
    let (a, b) = xs.split_at(mid);
    let (sa, sb) = rayon::join(|| tree_sum(a), || tree_sum(b));
    sa + sb
}

/// Fixed-shape pairwise sum of `f(i)` over `0..n`.
pub fn tree_sum_fn<F>(n: usize, f: &F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    fn go<F: Fn(usize) -> f64 + Sync>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= LEAF {
            let mut sum = 0.0;
            let mut c = 0.0;
            for i in lo..hi {
                let y = f(i) - c;
                let t = sum + y;
                c = (t - sum) - y;
                sum = t;
            }
            return sum;
        }
        let mid = lo + (hi - lo) / 2;
        let (sa, sb) = rayon::join(|| go(lo, mid, f), || go(mid, hi, f));
        sa + sb
    }
    go(0, n, f)
}

/// Order-preserving parallel map over an index range.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}
