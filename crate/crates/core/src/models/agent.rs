//! Representative-agent measure changes on an estimated risk-neutral
//! distribution.
//!
//! With marginal utility declining in the gross return `R`, the pricing
//! kernel is proportional to `u'(R)`, so the physical density is the
//! risk-neutral density reweighted by `1 / u'(R)`:
//!
//! * CRRA with relative risk aversion γ: weight `R^γ` (log utility is γ = 1);
//! * exponential (CARA-style) with coefficient γ*: weight `exp(γ* · R)`.
//!
//! All expectations are taken on the distribution's stored grid by the
//! trapezoid rule, so the functions here inherit the grid resolution of the
//! input estimate.  A tilt whose mass piles up in the last grid cell is
//! rejected rather than silently truncated.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::rnd::DistributionEstimate;

/// Marginal-utility family for the representative agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Utility {
    /// Log utility; identical to `Crra { gamma: 1.0 }`.
    Log,
    /// Power utility with relative risk aversion `gamma` ≥ 0.
    Crra { gamma: f64 },
    /// Exponential utility with tilt coefficient `gamma_star` > 0.
    Exponential { gamma_star: f64 },
}

impl Utility {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            Utility::Log => Ok(()),
            Utility::Crra { gamma } => {
                if !gamma.is_finite() || gamma < 0.0 {
                    return Err(ModelError::InvalidParams(format!(
                        "CRRA risk aversion must be finite and ≥ 0, got {gamma}"
                    )));
                }
                Ok(())
            }
            Utility::Exponential { gamma_star } => {
                if !gamma_star.is_finite() || gamma_star <= 0.0 {
                    return Err(ModelError::InvalidParams(format!(
                        "exponential tilt coefficient must be finite and > 0, got {gamma_star}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Largest admissible share of the reweighted mass in the final grid cell.
/// Beyond this the tilt is effectively unbounded on the covered support.
const TOP_CELL_SHARE_LIMIT: f64 = 0.05;

/// Pointwise reweighted density `w(x) f̃(x)` on the stored grid, with a
/// divergence check: every value must be finite and the last grid cell must
/// carry less than [`TOP_CELL_SHARE_LIMIT`] of the total reweighted mass.
fn tilted_integrand(
    base: &DistributionEstimate,
    weight: &dyn Fn(f64) -> f64,
) -> Result<(Vec<f64>, f64), ModelError> {
    let vals: Vec<f64> = base
        .grid
        .iter()
        .zip(&base.pdf)
        .map(|(&x, &f)| weight(x) * f.max(0.0))
        .collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::DivergentTilt(
            "reweighted density is non-finite on the grid".into(),
        ));
    }
    let total = crate::math::trapezoid(&base.grid, &vals);
    if !(total.is_finite() && total > 0.0) {
        return Err(ModelError::DivergentTilt(format!(
            "reweighted mass is {total}; expected a positive finite value"
        )));
    }
    let n = vals.len();
    let top_cell = 0.5 * (vals[n - 2] + vals[n - 1]) * (base.grid[n - 1] - base.grid[n - 2]);
    // A tilt whose mode lies beyond the grid shows up as an integrand that
    // is still rising at the right edge while carrying visible mass there;
    // the share cap alone would miss a slow exponential ramp.
    let rising_at_edge = vals[n - 1] >= vals[n - 2] && top_cell > 1e-9 * total;
    if top_cell > TOP_CELL_SHARE_LIMIT * total || rising_at_edge {
        return Err(ModelError::DivergentTilt(format!(
            "reweighted mass is not covered by the grid (top cell holds \
             {:.2e} of it and the integrand {} at the right edge)",
            top_cell / total,
            if rising_at_edge { "rises" } else { "falls" }
        )));
    }
    Ok((vals, total))
}

/// Physical CDF at `x` implied by a risk-neutral distribution and a CRRA
/// agent with risk aversion `gamma`:
/// `F(x) = Ẽ[R^γ · 1{R ≤ x}] / Ẽ[R^γ]`.
///
/// `gamma = 0` returns the risk-neutral CDF itself (no reweighting).
pub fn physical_cdf_crra(
    base: &DistributionEstimate,
    gamma: f64,
    x: f64,
) -> Result<f64, ModelError> {
    Utility::Crra { gamma }.validate()?;
    if gamma == 0.0 {
        return Ok(base.cdf_at(x).clamp(0.0, 1.0));
    }
    let (vals, total) = tilted_integrand(base, &|r: f64| r.powf(gamma))?;
    Ok((crate::math::partial_trapezoid(&base.grid, &vals, x) / total).clamp(0.0, 1.0))
}

/// Equity premium `E[R] − R_f` implied by a CRRA agent with risk aversion
/// `gamma`, where the physical expectation reweights the risk-neutral
/// distribution: `E[R] = Ẽ[R^{γ+1}] / Ẽ[R^γ]`.
pub fn crra_equity_premium(
    base: &DistributionEstimate,
    rf_gross: f64,
    gamma: f64,
) -> Result<f64, ModelError> {
    Utility::Crra { gamma }.validate()?;
    let (_, denom) = tilted_integrand(base, &|r: f64| r.powf(gamma))?;
    let (_, numer) = tilted_integrand(base, &|r: f64| r.powf(gamma + 1.0))?;
    Ok(numer / denom - rf_gross)
}

/// Equity premium implied by an exponential-utility agent with tilt
/// coefficient `gamma_star`: `E[R] = Ẽ[R e^{γ* R}] / Ẽ[e^{γ* R}]`.
pub fn exp_equity_premium(
    base: &DistributionEstimate,
    rf_gross: f64,
    gamma_star: f64,
) -> Result<f64, ModelError> {
    Utility::Exponential { gamma_star }.validate()?;
    let (_, denom) = tilted_integrand(base, &|r: f64| (gamma_star * r).exp())?;
    let (_, numer) = tilted_integrand(base, &|r: f64| r * (gamma_star * r).exp())?;
    Ok(numer / denom - rf_gross)
}

/// Equity premium for any supported utility; log utility maps to CRRA γ = 1.
pub fn equity_premium(
    base: &DistributionEstimate,
    rf_gross: f64,
    utility: Utility,
) -> Result<f64, ModelError> {
    match utility {
        Utility::Log => crra_equity_premium(base, rf_gross, 1.0),
        Utility::Crra { gamma } => crra_equity_premium(base, rf_gross, gamma),
        Utility::Exponential { gamma_star } => exp_equity_premium(base, rf_gross, gamma_star),
    }
}

/// The gap `τ − F(Q̃(τ))` between a probability level and the physical CDF
/// evaluated at the risk-neutral τ-quantile, under a CRRA agent.  Zero at
/// γ = 0 and increasing in γ: stronger risk aversion pushes the physical
/// distribution to the right, so less physical mass sits below `Q̃(τ)`.
pub fn tau_minus_f_at_rn_quantile(
    base: &DistributionEstimate,
    gamma: f64,
    tau: f64,
) -> Result<f64, ModelError> {
    assert!(
        tau > 0.0 && tau < 1.0,
        "probability level must lie in (0,1), got {tau}"
    );
    let q = base.quantile(tau);
    Ok(tau - physical_cdf_crra(base, gamma, q)?)
}
