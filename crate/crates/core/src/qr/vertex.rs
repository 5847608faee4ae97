//! Exhaustive vertex enumeration for small pinball-loss problems.
//!
//! Every basic solution of the quantile-regression LP interpolates p
//! observations, so for small n the global optimum can be found by solving
//! all C(n, p) interpolation systems and keeping the best objective. Used as
//! a fallback for n ≤ 30 and, independently re-implemented, as a test oracle.

use super::QRError;
use crate::math::linalg::solve_linear;
use itertools::Itertools;

/// Global minimizer of Σ ρ_τ(y − Xβ) by enumeration of all p-subsets.
/// Ties in the objective (1e-12 relative) resolve to the smaller ‖β‖₂.
pub(super) fn solve_by_enumeration(
    x: &[Vec<f64>],
    y: &[f64],
    tau: f64,
) -> Result<Vec<f64>, QRError> {
    let n = x.len();
    let p = x[0].len();
    let mut best: Option<(f64, f64, Vec<f64>)> = None; // (objective, ‖β‖², β)

    for subset in (0..n).combinations(p) {
        let a: Vec<Vec<f64>> = subset.iter().map(|&i| x[i].clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&i| y[i]).collect();
        let Some(beta) = solve_linear(&a, &b) else {
            continue;
        };
        let obj: f64 = x
            .iter()
            .zip(y)
            .map(|(row, &yi)| {
                let r = yi - row.iter().zip(&beta).map(|(u, v)| u * v).sum::<f64>();
                if r < 0.0 {
                    r * (tau - 1.0)
                } else {
                    r * tau
                }
            })
            .sum();
        let norm: f64 = beta.iter().map(|v| v * v).sum();
        let better = match &best {
            None => true,
            Some((bo, bn, _)) => {
                let tol = 1e-12 * (1.0 + bo.abs());
                obj < bo - tol || (obj <= bo + tol && norm < bn - 1e-15)
            }
        };
        if better {
            best = Some((obj, norm, beta));
        }
    }

    best.map(|(_, _, beta)| beta).ok_or(QRError::DegenerateDesign)
}
