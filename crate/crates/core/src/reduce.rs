//! Deterministic reductions.
//!
//! All loss reductions go through [`pairwise_sum`] so a value computed twice
//! from the same terms is bit-identical regardless of call site.

const BLOCK: usize = 32;

/// Pairwise (cascade) summation with a fixed split order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Arithmetic mean via [`pairwise_sum`]; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    pairwise_sum(xs) / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn matches_exact_integer_sum() {
        let xs: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
        assert_eq!(mean(&[]), 0.0);
    }

    #[test]
    fn more_accurate_than_naive_on_small_increments() {
        let mut xs = alloc::vec![0.1; 1 << 16];
        xs[0] = 1e8;
        let naive: f64 = xs.iter().sum();
        let exact = 1e8 + 0.1 * ((1 << 16) - 1) as f64;
        assert!((pairwise_sum(&xs) - exact).abs() <= (naive - exact).abs());
    }
}
