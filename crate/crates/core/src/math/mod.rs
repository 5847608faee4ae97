//! Shared numerical utilities: standard-normal helpers, grids, interpolation,
//! quadrature, root finding, monotone cubic interpolation, and isotonic
//! regression.

pub mod linalg;
mod pava;
mod pchip;
mod quad;
mod roots;

pub use pava::isotonic_nondecreasing;
pub use pchip::Pchip;
pub use quad::{adaptive_simpson, partial_trapezoid, trapezoid};
pub use roots::{bisect, BracketError};

use statrs::distribution::{ContinuousCDF, Normal};

fn std_normal() -> Normal {
    // Unit normal construction cannot fail.
    Normal::new(0.0, 1.0).unwrap()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile function.
///
/// The library inverse is polished with two Newton steps, which brings the
/// round-trip error down to machine precision for p away from 0 and 1.
pub fn norm_ppf(p: f64) -> f64 {
    let mut x = std_normal().inverse_cdf(p);
    for _ in 0..2 {
        let f = norm_cdf(x) - p;
        let d = norm_pdf(x);
        if d > 0.0 {
            x -= f / d;
        }
    }
    x
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + step * i as f64).collect()
}

/// The canonical quantile grid {0.001, 0.002, …, 0.999}.
pub fn tau_grid_999() -> Vec<f64> {
    (1..1000).map(|i| i as f64 / 1000.0).collect()
}

/// The coarse application grid {0.01, 0.02, …, 0.99}.
pub fn tau_grid_99() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

/// Linear interpolation of `(xs, ys)` at `x`, clamped to the end values
/// outside the abscissa range. `xs` must be nondecreasing.
pub fn interp_clamped(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let j = match xs.partition_point(|&v| v < x) {
        0 => 1,
        j => j,
    };
    let (x0, x1) = (xs[j - 1], xs[j]);
    let (y0, y1) = (ys[j - 1], ys[j]);
    if x1 == x0 {
        y0
    } else {
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Generalized inverse of a nondecreasing piecewise-linear CDF sampled on
/// `grid`: inf{x : F(x) ≥ p}, clamped to the grid ends.
pub fn quantile_from_cdf(grid: &[f64], cdf: &[f64], p: f64) -> f64 {
    debug_assert_eq!(grid.len(), cdf.len());
    let n = grid.len();
    if p <= cdf[0] {
        return grid[0];
    }
    if p > cdf[n - 1] {
        return grid[n - 1];
    }
    // First index with cdf[j] >= p; cdf[j-1] < p by the checks above.
    let j = cdf.partition_point(|&v| v < p);
    let (c0, c1) = (cdf[j - 1], cdf[j]);
    if c1 == c0 {
        grid[j]
    } else {
        grid[j - 1] + (grid[j] - grid[j - 1]) * (p - c0) / (c1 - c0)
    }
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the n−1 divisor.
pub fn sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// In-sample τ-quantile with the inf convention: the ⌈nτ⌉-th order statistic.
pub fn sample_quantile(xs: &[f64], tau: f64) -> f64 {
    assert!(!xs.is_empty());
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let k = ((xs.len() as f64 * tau).ceil() as usize).clamp(1, xs.len());
    sorted[k - 1]
}
