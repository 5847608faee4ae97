//! Bracketed root finding.

use thiserror::Error;

/// The supplied interval does not bracket a sign change.
#[derive(Debug, Error)]
#[error("no sign change on [{a}, {b}]: f(a)={fa:.3e}, f(b)={fb:.3e}")]
pub struct BracketError {
    pub a: f64,
    pub b: f64,
    pub fa: f64,
    pub fb: f64,
}

/// Bisection on `[a, b]` until the interval is shorter than `tol` or
/// `max_iter` halvings have been used. Returns the interval midpoint.
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, BracketError> {
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(BracketError { a, b, fa, fb });
    }
    let mut fa = fa;
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
        if (b - a).abs() < tol {
            break;
        }
    }
    Ok(0.5 * (a + b))
}
