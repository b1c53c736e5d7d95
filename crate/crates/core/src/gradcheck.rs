//! Central finite differences and relative-error bookkeeping for gradient
//! checks.

use alloc::vec::Vec;

/// Default step for central differences on 64-bit inputs.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Gradient of `f` at `x` by central differences with step `h`.
pub fn central_difference<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Worst entrywise relative error between two gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradError {
    pub max_relative: f64,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Entries where both magnitudes are below this are compared absolutely.
pub const ABS_FLOOR: f64 = 1e-12;

/// `|a - n| / max(|a|, |n|)` maximized over entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> GradError {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = GradError { max_relative: 0.0, index: 0, analytic: 0.0, numeric: 0.0 };
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let scale = a.abs().max(n.abs());
        let err = if scale < ABS_FLOOR { (a - n).abs() } else { (a - n).abs() / scale };
        if err > worst.max_relative || err.is_nan() {
            worst = GradError { max_relative: err, index: i, analytic: a, numeric: n };
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let x = [1.0, -2.0, 0.5];
        let g = central_difference(|v| v.iter().map(|a| a * a).sum(), &x, DEFAULT_STEP);
        let err = max_relative_error(&[2.0, -4.0, 1.0], &g);
        assert!(err.max_relative < 1e-10);
    }

    #[test]
    fn reports_worst_entry() {
        let e = max_relative_error(&[1.0, 2.0], &[1.0, 1.0]);
        assert_eq!(e.index, 1);
        assert_eq!(e.max_relative, 0.5);
    }
}
