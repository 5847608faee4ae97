//! Power-law model driven by a single uniform shock: M = A·Uᵅ and
//! R = B·U^(−β) with U uniform on (0,1), so the SDF and the market return
//! are perfectly negatively dependent and every quantity of interest is
//! available in closed form.

use super::ModelError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParetoParams {
    pub a: f64,
    pub alpha: f64,
    pub b: f64,
    pub beta: f64,
}

impl ParetoParams {
    /// Calibrate (A, α, B) from a target equity premium, net risk-free rate,
    /// and return tail index β, imposing the two no-arbitrage identities
    /// A·B = α − β + 1 and A/(α+1) = 1/R_f exactly.
    pub fn calibrated(premium: f64, net_rf: f64, beta: f64) -> Result<Self, ModelError> {
        if !(0.0..1.0).contains(&beta) {
            return Err(ModelError::InvalidParams(format!(
                "tail index beta must lie in (0,1), got {beta}"
            )));
        }
        let gross = 1.0 + net_rf;
        if gross <= 0.0 {
            return Err(ModelError::InvalidParams("gross rate must be positive".into()));
        }
        // E(R) = B/(1−β) pins B; the product identity then pins α linearly.
        let b = (gross + premium) * (1.0 - beta);
        let d = b / gross;
        if (d - 1.0).abs() < 1e-12 {
            return Err(ModelError::InvalidParams(
                "degenerate calibration: B equals the gross rate".into(),
            ));
        }
        let alpha = (1.0 - beta - d) / (d - 1.0);
        let a = (alpha + 1.0) / gross;
        let out = ParetoParams { a, alpha, b, beta };
        out.validate()?;
        Ok(out)
    }

    /// Change the return tail index while holding the SDF law (A, α) — and
    /// hence the risk-free rate — fixed; B is recomputed from the product
    /// identity. The local bound depends only on α, so it is unchanged.
    pub fn with_beta(&self, new_beta: f64) -> Result<Self, ModelError> {
        if !(0.0..1.0).contains(&new_beta) {
            return Err(ModelError::InvalidParams(format!(
                "tail index beta must lie in (0,1), got {new_beta}"
            )));
        }
        let b = (self.alpha - new_beta + 1.0) / self.a;
        let out = ParetoParams {
            a: self.a,
            alpha: self.alpha,
            b,
            beta: new_beta,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.a > 0.0 && self.alpha > 0.0 && self.b > 0.0 && self.beta > 0.0) {
            return Err(ModelError::InvalidParams(
                "all Pareto parameters must be positive".into(),
            ));
        }
        let lhs = self.a * self.b;
        let rhs = self.alpha - self.beta + 1.0;
        if (lhs - rhs).abs() > 1e-8 * rhs.abs().max(1.0) {
            return Err(ModelError::InvalidParams(format!(
                "no-arbitrage product identity violated: A·B = {lhs:.10} vs α−β+1 = {rhs:.10}"
            )));
        }
        Ok(())
    }

    /// Gross risk-free rate (α+1)/A.
    pub fn risk_free(&self) -> f64 {
        (self.alpha + 1.0) / self.a
    }

    pub fn sdf_mean(&self) -> f64 {
        self.a / (self.alpha + 1.0)
    }

    pub fn sdf_sd(&self) -> f64 {
        let m2 = self.a * self.a / (2.0 * self.alpha + 1.0);
        (m2 - self.sdf_mean().powi(2)).max(0.0).sqrt()
    }

    pub fn sdf_vol(&self) -> f64 {
        self.sdf_sd() / self.sdf_mean()
    }

    /// E(R) = B/(1−β); finite only for β < 1 (enforced at construction).
    pub fn expected_return(&self) -> f64 {
        self.b / (1.0 - self.beta)
    }

    /// σ(R); requires β < 1/2 for a finite second moment.
    pub fn return_sd(&self) -> Result<f64, ModelError> {
        if self.beta >= 0.5 {
            return Err(ModelError::MomentUndefined(format!(
                "E(R²) diverges for beta = {} ≥ 1/2",
                self.beta
            )));
        }
        let m2 = self.b * self.b / (1.0 - 2.0 * self.beta);
        Ok((m2 - self.expected_return().powi(2)).max(0.0).sqrt())
    }

    /// Physical CDF 1 − (x/B)^(−1/β) on the support [B, ∞).
    pub fn physical_cdf(&self, x: f64) -> Result<f64, ModelError> {
        if x < self.b {
            return Err(ModelError::OutOfSupport { x });
        }
        Ok(1.0 - (x / self.b).powf(-1.0 / self.beta))
    }

    /// Risk-neutral CDF 1 − (x/B)^(−(α+1)/β): the SDF change of measure
    /// thickens the crash tail by the factor α+1 in the exponent.
    pub fn rn_cdf(&self, x: f64) -> Result<f64, ModelError> {
        if x < self.b {
            return Err(ModelError::OutOfSupport { x });
        }
        Ok(1.0 - (x / self.b).powf(-(self.alpha + 1.0) / self.beta))
    }

    pub fn rn_quantile(&self, tau: f64) -> f64 {
        self.b * (1.0 - tau).powf(-self.beta / (self.alpha + 1.0))
    }

    pub fn physical_quantile(&self, tau: f64) -> f64 {
        self.b * (1.0 - tau).powf(-self.beta)
    }

    /// Ordinal dominance curve φ(τ) = 1 − (1−τ)^{1/(α+1)}, independent of β.
    pub fn odc_phi(&self, tau: f64) -> f64 {
        1.0 - (1.0 - tau).powf(1.0 / (self.alpha + 1.0))
    }

    /// Sharpe ratio (E(R) − R_f)/σ(R).
    pub fn sharpe_ratio(&self) -> Result<f64, ModelError> {
        Ok((self.expected_return() - self.risk_free()) / self.return_sd()?)
    }

    /// HJ bound |E(R) − R_f|/(σ(R)·R_f).
    pub fn hj(&self) -> Result<f64, ModelError> {
        Ok(self.sharpe_ratio()?.abs() / self.risk_free())
    }

    /// Map one uniform draw to the (SDF, return) pair.
    pub fn sample(&self, u: f64) -> (f64, f64) {
        (self.a * u.powf(self.alpha), self.b * u.powf(-self.beta))
    }

    /// Physical density of the gross return on [b, ∞).
    pub fn physical_pdf(&self, x: f64) -> Result<f64, ModelError> {
        if x < self.b {
            return Err(ModelError::OutOfSupport { x });
        }
        let c = 1.0 / self.beta;
        Ok(c / self.b * (x / self.b).powf(-c - 1.0))
    }

    /// Risk-neutral density of the gross return on [b, ∞).
    pub fn rn_pdf(&self, x: f64) -> Result<f64, ModelError> {
        if x < self.b {
            return Err(ModelError::OutOfSupport { x });
        }
        let c = (self.alpha + 1.0) / self.beta;
        Ok(c / self.b * (x / self.b).powf(-c - 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fig_calibration() -> ParetoParams {
        ParetoParams::calibrated(0.08, 0.0, 0.33).unwrap()
    }

    #[test]
    fn calibration_hits_premium_and_rate_exactly() {
        let p = fig_calibration();
        assert_abs_diff_eq!(p.risk_free(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.expected_return() - p.risk_free(), 0.08, epsilon = 1e-12);
        // Display-rounded values used in published figures.
        assert!((p.a - 1.19).abs() < 0.005);
        assert!((p.alpha - 0.19).abs() < 0.005);
        assert!((p.b - 0.72).abs() < 0.005);
        p.validate().unwrap();
    }

    #[test]
    fn support_edge_and_measure_ordering() {
        let p = fig_calibration();
        assert_abs_diff_eq!(p.physical_cdf(p.b).unwrap(), 0.0, epsilon = 1e-15);
        assert!(matches!(
            p.physical_cdf(0.5 * p.b),
            Err(ModelError::OutOfSupport { .. })
        ));
        // Risk-neutral measure dominates in the left tail.
        for x in [0.75, 0.9, 1.0, 1.5] {
            assert!(p.rn_cdf(x).unwrap() > p.physical_cdf(x).unwrap());
        }
    }

    #[test]
    fn quantiles_invert_cdfs() {
        let p = fig_calibration();
        for tau in [0.01, 0.2, 0.5, 0.9] {
            assert_abs_diff_eq!(p.rn_cdf(p.rn_quantile(tau)).unwrap(), tau, epsilon = 1e-12);
            assert_abs_diff_eq!(
                p.physical_cdf(p.physical_quantile(tau)).unwrap(),
                tau,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                p.physical_cdf(p.rn_quantile(tau)).unwrap(),
                p.odc_phi(tau),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn beta_reindex_preserves_sdf_and_local_inputs() {
        let p = fig_calibration();
        let q = p.with_beta(0.45).unwrap();
        assert_abs_diff_eq!(q.risk_free(), p.risk_free(), epsilon = 1e-14);
        assert_abs_diff_eq!(q.a, p.a, epsilon = 0.0);
        assert_abs_diff_eq!(q.alpha, p.alpha, epsilon = 0.0);
        for tau in [0.02, 0.1, 0.5] {
            assert_abs_diff_eq!(q.odc_phi(tau), p.odc_phi(tau), epsilon = 0.0);
        }
        q.validate().unwrap();
    }

    #[test]
    fn second_moment_guard() {
        let p = fig_calibration().with_beta(0.6);
        // β ∈ (0.5, 1): construction fine, σ(R) undefined.
        let p = p.unwrap();
        assert!(matches!(
            p.return_sd(),
            Err(ModelError::MomentUndefined(_))
        ));
    }
}
