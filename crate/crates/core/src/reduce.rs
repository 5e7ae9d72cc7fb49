//! Deterministic floating-point reductions.
//!
//! Every double sum in the crate goes through [`row_sum`]: rows are evaluated
//! independently (possibly in parallel), collected in ascending index order,
//! and combined by a fixed pairwise tree. The tree shape depends only on the
//! number of rows, so the result is bit-identical for any worker count.

use rayon::prelude::*;

/// Blocks at or below this length are summed left to right.
const LEAF: usize = 8;

/// Pairwise (cascade) summation with a fixed split at `len / 2`.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= LEAF {
        let mut acc = 0.0;
        for x in v {
            acc += *x;
        }
        acc
    } else {
        let (lo, hi) = v.split_at(v.len() / 2);
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

/// Evaluates `row(i)` for `i in 0..n` and reduces the rows with
/// [`pairwise_sum`].
pub fn row_sum<F>(n: usize, row: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let rows: Vec<f64> = (0..n).into_par_iter().map(row).collect();
    pairwise_sum(&rows)
}

/// Like [`row_sum`] for rows producing several accumulators at once.
pub fn row_sum_n<const K: usize, F>(n: usize, row: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync + Send,
{
    let rows: Vec<[f64; K]> = (0..n).into_par_iter().map(row).collect();
    let mut out = [0.0; K];
    let mut column = Vec::with_capacity(n);
    for (k, slot) in out.iter_mut().enumerate() {
        column.clear();
        column.extend(rows.iter().map(|r| r[k]));
        *slot = pairwise_sum(&column);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_small_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn row_sum_is_independent_of_pool_size() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| row_sum(5000, f));
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| row_sum(5000, f));
        assert_eq!(one.to_bits(), many.to_bits());
    }
}
