//! Option-implied lower bound on the quantile gap and the risk-adjusted
//! quantile predictor.
//!
//! The physical τ-quantile of the market return sits above the risk-neutral
//! τ-quantile whenever investors are compensated for bearing downside risk.
//! A third-order expansion of the marginal-utility ratio ζ around the
//! risk-free rate turns that gap into a lower bound `LB` on
//! `τ − F(Q̃_τ)` that is computable from option prices alone; the preference
//! coefficients θ₁..θ₃ default to the empirical values of Chabi-Yo & Loudis
//! (2020).  Dividing `LB` by the risk-neutral density at the quantile
//! converts probability units into return units (`RA`), and
//! `Q̂ = Q̃ + RA` is the risk-adjusted quantile predictor.
//!
//! The predictor rests on a first-order functional expansion whose
//! remainder is neglected; every output row carries
//! `first_order_approx: true` to make that visible downstream.  The range
//! of quantile levels on which the bound direction is guaranteed is
//! governed by a fourth-derivative condition on ζ; [`validity_tau_star`]
//! computes the threshold τ* below which it holds.

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::math::{adaptive_simpson, partial_trapezoid, trapezoid};
use crate::models::Utility;
use crate::rnd::{rn_moment, rn_truncated_moment, DistributionEstimate};

/// Default τ-step for the central-difference reciprocal density, matching
/// the native resolution of the fitted quantile curves.
pub const DEFAULT_CENTRAL_DIFF_STEP: f64 = 0.001;

/// One (date, τ) row of the risk-adjustment pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct RiskAdjustment {
    pub date: Option<NaiveDate>,
    pub horizon_days: i64,
    pub tau: f64,
    /// Lower bound on τ − F(Q̃_τ), in probability units.  Negative values
    /// are preserved for diagnostics, never clamped.
    pub lb: f64,
    /// Risk-neutral density at the τ-quantile (central-difference estimate).
    pub pdf_at_q: f64,
    /// lb / pdf_at_q, in gross-return units.
    pub ra: f64,
    /// Risk-neutral τ-quantile.
    pub q_tilde: f64,
    /// Risk-adjusted quantile predictor q_tilde + ra.
    pub q_hat: f64,
    /// The expansion's remainder term is neglected by construction.
    pub first_order_approx: bool,
}

/// Where a set of preference coefficients came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffSource {
    EmpiricalDefault,
    ModelDerived,
}

/// Taylor coefficients θ_k = ζ⁽ᵏ⁾(R_f)/k! of the marginal-utility ratio,
/// for k = 1, 2, 3.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UtilityCoeffs {
    pub theta: (f64, f64, f64),
    pub source: CoeffSource,
}

impl UtilityCoeffs {
    /// The empirical specification θ_k = (−1)^{k+1}/R_f^k estimated by
    /// Chabi-Yo & Loudis (2020, Table 6).
    pub fn empirical_default(rf: f64) -> Self {
        assert!(rf > 0.0, "gross risk-free rate must be positive, got {rf}");
        UtilityCoeffs {
            theta: (1.0 / rf, -1.0 / (rf * rf), 1.0 / (rf * rf * rf)),
            source: CoeffSource::EmpiricalDefault,
        }
    }

    /// Coefficients implied by a parametric utility: ζ(x) = x/R_f for log,
    /// (x/R_f)^γ for CRRA, e^{γ*(x−R_f)} for exponential.
    pub fn model_derived(utility: Utility, rf: f64) -> Self {
        assert!(rf > 0.0, "gross risk-free rate must be positive, got {rf}");
        let theta = match utility {
            Utility::Log => (1.0 / rf, 0.0, 0.0),
            Utility::Crra { gamma } => (
                gamma / rf,
                gamma * (gamma - 1.0) / (2.0 * rf * rf),
                gamma * (gamma - 1.0) * (gamma - 2.0) / (6.0 * rf * rf * rf),
            ),
            Utility::Exponential { gamma_star } => (
                gamma_star,
                gamma_star * gamma_star / 2.0,
                gamma_star * gamma_star * gamma_star / 6.0,
            ),
        };
        UtilityCoeffs {
            theta,
            source: CoeffSource::ModelDerived,
        }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.theta.0, self.theta.1, self.theta.2]
    }
}

#[derive(Debug, Error)]
pub enum RiskAdjustError {
    #[error("quantile level {0} outside the feasible-bound range (0, 0.5]")]
    InvalidTau(f64),
    #[error("preference-weighted moment denominator is {0:.4}; bound undefined")]
    DenominatorNonpositive(f64),
    #[error("central-difference step h={h} leaves (0,1) at tau={tau}")]
    StepOutOfRange { tau: f64, h: f64 },
    #[error("unsupported utility: {0}")]
    UnsupportedUtility(String),
    #[error("no validity threshold in (0, 0.5): {0}")]
    NoRoot(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Feasible lower bound on τ − F(Q̃_τ) from risk-neutral moments with the
/// empirical preference coefficients.
pub fn feasible_lb(
    dist: &DistributionEstimate,
    rf: f64,
    tau: f64,
) -> Result<f64, RiskAdjustError> {
    feasible_lb_with(dist, rf, tau, &UtilityCoeffs::empirical_default(rf))
}

/// Feasible lower bound with explicit coefficients:
/// `LB = Σ θ_k (τ·M̃(k) − M̃(k, Q̃_τ)) / (1 + Σ θ_k M̃(k))`, where M̃(k) is
/// the k-th risk-neutral moment of R − R_f and M̃(k, q) its truncation to
/// {R ≤ q}.
pub fn feasible_lb_with(
    dist: &DistributionEstimate,
    rf: f64,
    tau: f64,
    coeffs: &UtilityCoeffs,
) -> Result<f64, RiskAdjustError> {
    if !(tau > 0.0 && tau <= 0.5) {
        return Err(RiskAdjustError::InvalidTau(tau));
    }
    let theta = coeffs.as_array();
    let mut num = 0.0;
    let mut den = 1.0;
    for k in 1..=3u32 {
        let full = rn_moment(dist, k, rf);
        let trunc = rn_truncated_moment(dist, k, rf, tau);
        num += theta[k as usize - 1] * (tau * full - trunc);
        den += theta[k as usize - 1] * full;
    }
    if den <= 0.0 {
        return Err(RiskAdjustError::DenominatorNonpositive(den));
    }
    Ok(num / den)
}

/// Feasible lower bound computed from a tabulated risk-neutral quantile
/// curve alone: the moments are τ-integrals of powers of Q̃(u) − R_f,
/// evaluated by the trapezoid rule on the curve's own grid (the truncation
/// integrates up to `tau` with a split cell).  Suits simulation studies
/// where per-date quantiles are available in closed form and no full CDF is
/// materialized; the tails beyond the grid are dropped consistently from
/// numerator and denominator.
pub fn lb_from_quantile_curve(
    taus: &[f64],
    quantiles: &[f64],
    rf: f64,
    tau: f64,
    coeffs: &UtilityCoeffs,
) -> Result<f64, RiskAdjustError> {
    if taus.len() != quantiles.len() || taus.len() < 2 {
        return Err(RiskAdjustError::InvalidInput(format!(
            "quantile curve has {} levels and {} values; need matching length ≥ 2",
            taus.len(),
            quantiles.len()
        )));
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) || taus[0] <= 0.0 || taus[taus.len() - 1] >= 1.0 {
        return Err(RiskAdjustError::InvalidInput(
            "quantile levels must be strictly increasing inside (0,1)".into(),
        ));
    }
    if !(tau > 0.0 && tau <= 0.5) {
        return Err(RiskAdjustError::InvalidTau(tau));
    }
    if tau < taus[0] {
        return Err(RiskAdjustError::InvalidInput(format!(
            "truncation level {tau} lies below the curve's first level {}",
            taus[0]
        )));
    }
    let theta = coeffs.as_array();
    let mut num = 0.0;
    let mut den = 1.0;
    for k in 1..=3i32 {
        let integrand: Vec<f64> = quantiles.iter().map(|&q| (q - rf).powi(k)).collect();
        let full = trapezoid(taus, &integrand);
        let trunc = partial_trapezoid(taus, &integrand, tau);
        num += theta[k as usize - 1] * (tau * full - trunc);
        den += theta[k as usize - 1] * full;
    }
    if den <= 0.0 {
        return Err(RiskAdjustError::DenominatorNonpositive(den));
    }
    Ok(num / den)
}

/// Risk adjustment in return units: `RA = LB · (Q̃(τ+h) − Q̃(τ−h)) / (2h)`,
/// the central-difference estimate of `LB / f̃(Q̃_τ)`.
pub fn gateaux_ra(
    lb: f64,
    dist: &DistributionEstimate,
    tau: f64,
    h: f64,
) -> Result<f64, RiskAdjustError> {
    if !(h > 0.0) || tau - h <= 0.0 || tau + h >= 1.0 {
        return Err(RiskAdjustError::StepOutOfRange { tau, h });
    }
    let spread = dist.quantile(tau + h) - dist.quantile(tau - h);
    Ok(lb * spread / (2.0 * h))
}

/// The risk-adjusted quantile predictor `Q̂ = Q̃ + RA`.
pub fn quantile_predictor(q_tilde: f64, ra: f64) -> f64 {
    q_tilde + ra
}

/// Number of adjacent strict decreases in a predictor curve ordered by τ;
/// zero means the predicted quantiles do not cross.
pub fn crossing_violations(q_hat: &[f64]) -> usize {
    q_hat.windows(2).filter(|w| w[1] < w[0]).count()
}

/// Full per-τ risk-adjustment rows for one distribution.
pub fn risk_adjustment_curve(
    dist: &DistributionEstimate,
    rf: f64,
    taus: &[f64],
    h: f64,
    coeffs: &UtilityCoeffs,
) -> Result<Vec<RiskAdjustment>, RiskAdjustError> {
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        if !(h > 0.0) || tau - h <= 0.0 || tau + h >= 1.0 {
            return Err(RiskAdjustError::StepOutOfRange { tau, h });
        }
        let lb = feasible_lb_with(dist, rf, tau, coeffs)?;
        let q_tilde = dist.quantile(tau);
        let spread = dist.quantile(tau + h) - dist.quantile(tau - h);
        if !(spread > 0.0) {
            return Err(RiskAdjustError::InvalidInput(format!(
                "quantile curve is flat at tau={tau} (step {h}); reciprocal density undefined"
            )));
        }
        let pdf_at_q = 2.0 * h / spread;
        let ra = lb * spread / (2.0 * h);
        rows.push(RiskAdjustment {
            date: dist.date,
            horizon_days: dist.horizon_days,
            tau,
            lb,
            pdf_at_q,
            ra,
            q_tilde,
            q_hat: quantile_predictor(q_tilde, ra),
            first_order_approx: true,
        });
    }
    Ok(rows)
}

/// Physical crash probability P(R ≤ Q̃_τ) under a log-utility agent: the
/// change of measure is R/R_f, so the probability is the truncated first
/// moment `(M̃(1, Q̃_τ) + R_f·τ) / R_f`.
pub fn crash_prob_log_utility(dist: &DistributionEstimate, rf: f64, tau: f64) -> f64 {
    assert!(
        tau > 0.0 && tau < 1.0,
        "quantile level must lie in (0,1), got {tau}"
    );
    (rn_truncated_moment(dist, 1, rf, tau) + rf * tau) / rf
}

/// ζ⁽⁴⁾ for CRRA utility: γ(γ−1)(γ−2)(γ−3)·x^{γ−4}/R_f^γ.
fn crra_zeta4(x: f64, rf: f64, gamma: f64) -> f64 {
    gamma * (gamma - 1.0) * (gamma - 2.0) * (gamma - 3.0) * x.powf(gamma - 4.0) / rf.powf(gamma)
}

/// The fourth-order remainder kernel
/// `G(x) = (x−R_f)⁴/4! · ∫₀¹ ζ⁽⁴⁾(R_f + s(x−R_f)) (1−s)³ ds`.
fn g_kernel(x: f64, rf: f64, gamma: f64) -> f64 {
    let d = x - rf;
    if d == 0.0 {
        return 0.0;
    }
    let integral = adaptive_simpson(
        &|s: f64| crra_zeta4(rf + s * d, rf, gamma) * (1.0 - s).powi(3),
        0.0,
        1.0,
        1e-10,
    );
    d.powi(4) / 24.0 * integral
}

/// Largest quantile level τ* at which the lower-bound direction is
/// guaranteed: the root of `G(Q̃_τ) = Ẽ[G(R)]` in (0, 0.5).
///
/// Log utility (and any CRRA γ ∈ {0,1,2,3}) has ζ⁽⁴⁾ ≡ 0, so every level is
/// valid and τ* = 1.  CRRA with γ ∈ (0,1) ∪ (2,3) has ζ⁽⁴⁾ < 0 and a
/// computable threshold.  Any utility with ζ⁽⁴⁾ > 0 — exponential, or CRRA
/// with γ ∈ (1,2) ∪ (3,∞) — violates the sign condition and is refused.
pub fn validity_tau_star(
    utility: Utility,
    dist: &DistributionEstimate,
    rf: f64,
) -> Result<f64, RiskAdjustError> {
    match utility {
        Utility::Log => Ok(1.0),
        Utility::Exponential { gamma_star } => Err(RiskAdjustError::UnsupportedUtility(format!(
            "exponential utility (coefficient {gamma_star}) has ζ⁽⁴⁾ > 0 everywhere; \
             the fourth-derivative sign condition fails"
        ))),
        Utility::Crra { gamma } => {
            if !gamma.is_finite() || gamma < 0.0 {
                return Err(RiskAdjustError::InvalidInput(format!(
                    "CRRA risk aversion must be finite and ≥ 0, got {gamma}"
                )));
            }
            let sign = gamma * (gamma - 1.0) * (gamma - 2.0) * (gamma - 3.0);
            if sign == 0.0 {
                // ζ⁽⁴⁾ ≡ 0: the expansion is exact at third order.
                return Ok(1.0);
            }
            if sign > 0.0 {
                return Err(RiskAdjustError::UnsupportedUtility(format!(
                    "CRRA γ={gamma} gives ζ⁽⁴⁾ > 0; the sign condition needs γ in (0,1) ∪ (2,3)"
                )));
            }
            let g_vals: Vec<f64> = dist
                .grid
                .iter()
                .zip(&dist.pdf)
                .map(|(&x, &f)| g_kernel(x, rf, gamma) * f.max(0.0))
                .collect();
            let mean_g = trapezoid(&dist.grid, &g_vals);
            let gamma_prime = |t: f64| g_kernel(dist.quantile(t), rf, gamma) - mean_g;
            let (lo, hi) = (1e-3, 0.5);
            let (a, b) = (gamma_prime(lo), gamma_prime(hi));
            if a.signum() == b.signum() {
                return Err(RiskAdjustError::NoRoot(format!(
                    "Γ'({lo}) = {a:+.3e} and Γ'({hi}) = {b:+.3e} share a sign"
                )));
            }
            crate::math::bisect(gamma_prime, lo, hi, 1e-10, 200)
                .map_err(|e| RiskAdjustError::NoRoot(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::linspace;
    use crate::rnd::MeasureTag;

    /// Standard normal CDF via the Abramowitz–Stegun 7.1.26 erf polynomial.
    fn normal_cdf(z: f64) -> f64 {
        let x = z / std::f64::consts::SQRT_2;
        let (sign, x) = if x < 0.0 { (-1.0, -x) } else { (1.0, x) };
        let t = 1.0 / (1.0 + 0.3275911 * x);
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
                + 0.254829592)
                * t
                * (-x * x).exp();
        0.5 * (1.0 + sign * y)
    }

    /// Risk-neutral lognormal return distribution over `t_years` at
    /// volatility `sigma`, gross rate `rf`.
    fn bs_dist(sigma: f64, t_years: f64, rf: f64) -> DistributionEstimate {
        let a = rf.ln() - 0.5 * sigma * sigma * t_years;
        let s = sigma * t_years.sqrt();
        let grid = linspace((a - 7.0 * s).exp(), (a + 7.0 * s).exp(), 4001);
        DistributionEstimate::from_functions(
            grid,
            |x| normal_cdf((x.ln() - a) / s),
            |x| {
                let z = (x.ln() - a) / s;
                (-0.5 * z * z).exp() / (x * s * (2.0 * std::f64::consts::PI).sqrt())
            },
            MeasureTag::RiskNeutral,
            30,
        )
        .unwrap()
    }

    #[test]
    fn empirical_coefficients_follow_the_alternating_pattern() {
        let rf = 1.004;
        let c = UtilityCoeffs::empirical_default(rf);
        assert_eq!(c.theta.0, 1.0 / rf);
        assert_eq!(c.theta.1, -1.0 / rf.powi(2));
        assert_eq!(c.theta.2, 1.0 / rf.powi(3));
        assert_eq!(c.source, CoeffSource::EmpiricalDefault);
    }

    #[test]
    fn model_coefficients_specialize_correctly() {
        let rf = 1.01;
        let log = UtilityCoeffs::model_derived(Utility::Log, rf);
        let crra1 = UtilityCoeffs::model_derived(Utility::Crra { gamma: 1.0 }, rf);
        assert_eq!(log.theta, crra1.theta);
        assert_eq!(log.theta, (1.0 / rf, 0.0, 0.0));
        let exp = UtilityCoeffs::model_derived(Utility::Exponential { gamma_star: 2.0 }, rf);
        assert_eq!(exp.theta, (2.0, 2.0, 8.0 / 6.0));
    }

    #[test]
    fn near_degenerate_distribution_gives_zero_bound() {
        // All mass within a hair of R_f: every moment of R − R_f vanishes.
        // The bound scales like the return volatility (here 1e-5).
        let d = bs_dist(1e-5, 30.0 / 365.0, 1.002);
        let lb = feasible_lb(&d, 1.002, 0.3).unwrap();
        assert!(lb.abs() < 1e-5, "LB = {lb}");
        // Log-utility crash probability degenerates to τ itself.
        let p = crash_prob_log_utility(&d, 1.002, 0.3);
        assert!((p - 0.3).abs() < 1e-5, "crash prob {p}");
    }

    #[test]
    fn tau_outside_half_is_rejected() {
        let d = bs_dist(0.2, 30.0 / 365.0, 1.002);
        assert!(matches!(
            feasible_lb(&d, 1.002, 0.6),
            Err(RiskAdjustError::InvalidTau(_))
        ));
        assert!(matches!(
            lb_from_quantile_curve(&[0.1, 0.2], &[0.9, 1.0], 1.0, 0.7, &UtilityCoeffs::empirical_default(1.0)),
            Err(RiskAdjustError::InvalidTau(_))
        ));
    }

    #[test]
    fn zero_lower_bound_means_zero_adjustment_and_identity_predictor() {
        let d = bs_dist(0.2, 30.0 / 365.0, 1.002);
        let ra = gateaux_ra(0.0, &d, 0.05, 0.001).unwrap();
        assert_eq!(ra, 0.0);
        assert_eq!(quantile_predictor(1.01, 0.0), 1.01);
        assert!(matches!(
            gateaux_ra(0.01, &d, 0.0005, 0.001),
            Err(RiskAdjustError::StepOutOfRange { .. })
        ));
    }

    #[test]
    fn curve_moments_agree_with_cdf_moments() {
        // The same bound computed two ways: dense CDF quadrature vs a
        // 999-point quantile-curve trapezoid.  The curve path truncates the
        // τ-integrals to [0.001, 0.999], so agreement is approximate, with
        // the worst case at small τ where the dropped left tail matters.
        let rf = 1.002;
        let d = bs_dist(0.18, 30.0 / 365.0, rf);
        let taus: Vec<f64> = crate::math::tau_grid_999();
        let qs: Vec<f64> = taus.iter().map(|&t| d.quantile(t)).collect();
        let coeffs = UtilityCoeffs::empirical_default(rf);
        for tau in [0.05, 0.2, 0.5] {
            let a = feasible_lb_with(&d, rf, tau, &coeffs).unwrap();
            let b = lb_from_quantile_curve(&taus, &qs, rf, tau, &coeffs).unwrap();
            assert!(
                (a - b).abs() < 0.1 * a.abs().max(1e-4),
                "τ={tau}: cdf path {a}, curve path {b}"
            );
        }
    }

    #[test]
    fn adjustment_rows_carry_consistent_units() {
        let rf = 1.002;
        let d = bs_dist(0.2, 30.0 / 365.0, rf);
        let coeffs = UtilityCoeffs::empirical_default(rf);
        let rows =
            risk_adjustment_curve(&d, rf, &[0.05, 0.1, 0.2], DEFAULT_CENTRAL_DIFF_STEP, &coeffs)
                .unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert!(row.pdf_at_q > 0.0);
            assert!(row.ra.is_finite());
            assert!((row.ra * row.pdf_at_q - row.lb).abs() < 1e-12);
            assert!((row.q_hat - row.q_tilde - row.ra).abs() < 1e-15);
            assert!(row.lb > 0.0, "downside bound should be positive here");
            assert!(row.q_hat > row.q_tilde);
            assert!(row.first_order_approx);
        }
        // Predicted quantiles inherit monotonicity at these levels.
        let q_hats: Vec<f64> = rows.iter().map(|r| r.q_hat).collect();
        assert_eq!(crossing_violations(&q_hats), 0);
        assert_eq!(crossing_violations(&[1.0, 0.99, 1.01]), 1);
    }

    #[test]
    fn crash_probability_approaches_one_with_tau() {
        let d = bs_dist(0.2, 30.0 / 365.0, 1.002);
        let p = crash_prob_log_utility(&d, 1.002, 0.999);
        assert!((p - 1.0).abs() < 5e-3, "martingale limit violated: {p}");
    }

    #[test]
    fn validity_threshold_branches_on_the_fourth_derivative_sign() {
        let d = bs_dist(0.2, 1.0, 1.02);
        assert_eq!(validity_tau_star(Utility::Log, &d, 1.02).unwrap(), 1.0);
        for gamma in [0.0, 1.0, 2.0, 3.0] {
            assert_eq!(
                validity_tau_star(Utility::Crra { gamma }, &d, 1.02).unwrap(),
                1.0
            );
        }
        for gamma in [1.5, 5.0] {
            assert!(matches!(
                validity_tau_star(Utility::Crra { gamma }, &d, 1.02),
                Err(RiskAdjustError::UnsupportedUtility(_))
            ));
        }
        assert!(matches!(
            validity_tau_star(Utility::Exponential { gamma_star: 1.0 }, &d, 1.02),
            Err(RiskAdjustError::UnsupportedUtility(_))
        ));
    }

    #[test]
    fn crra_validity_threshold_is_an_interior_sign_change() {
        let rf = 1.02;
        let d = bs_dist(0.2, 1.0, rf);
        let gamma = 2.5;
        let tau_star = validity_tau_star(Utility::Crra { gamma }, &d, rf).unwrap();
        assert!(
            tau_star > 0.0 && tau_star < 0.5,
            "threshold {tau_star} not interior"
        );
        // Dense scan cross-check: Γ'(τ) changes sign exactly at the root.
        let g_vals: Vec<f64> = d
            .grid
            .iter()
            .zip(&d.pdf)
            .map(|(&x, &f)| g_kernel(x, rf, gamma) * f)
            .collect();
        let mean_g = trapezoid(&d.grid, &g_vals);
        let gp = |t: f64| g_kernel(d.quantile(t), rf, gamma) - mean_g;
        assert!(gp(tau_star - 0.01) < 0.0);
        assert!(gp(tau_star + 0.01) > 0.0);
    }
}
