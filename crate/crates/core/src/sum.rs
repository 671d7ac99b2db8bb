//! Fixed-order pairwise reduction over sample indices.
//!
//! The reduction tree depends only on the index range, so results are
//! bitwise reproducible whatever thread executes each half.

const LEAF: usize = 32;

/// Sums `f(n)` over `n in range` into accumulators of length `width`, using
/// a balanced binary tree with sequential leaves of at most `LEAF` terms.
/// `f` adds its contribution into the provided buffer.
pub(crate) fn pairwise_accumulate<F>(len: usize, width: usize, f: &F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    fn rec<F>(lo: usize, hi: usize, width: usize, f: &F) -> Vec<f64>
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        if hi - lo <= LEAF {
            let mut acc = vec![0.0; width];
            for n in lo..hi {
                f(n, &mut acc);
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        let (mut left, right) = if hi - lo >= 4 * LEAF {
            rayon::join(|| rec(lo, mid, width, f), || rec(mid, hi, width, f))
        } else {
            (rec(lo, mid, width, f), rec(mid, hi, width, f))
        };
        for (l, r) in left.iter_mut().zip(&right) {
            *l += r;
        }
        left
    }
    rec(0, len, width, f)
}

/// Pairwise sum of a slice.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
