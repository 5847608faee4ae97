//! Gaussian model variants: a jointly normal (return, SDF) pair and a
//! bivariate lognormal pair with an explicit time-scale parameter.

use super::ModelError;
use crate::math::{bisect, norm_cdf, norm_pdf, norm_ppf};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Jointly normal gross return R ~ N(μ_R, σ_R²) and SDF M ~ N(μ_M, σ_M²)
/// with correlation ρ.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct JointNormalParams {
    pub mu_r: f64,
    pub sigma_r: f64,
    pub mu_m: f64,
    pub sigma_m: f64,
    pub rho: f64,
}

impl JointNormalParams {
    /// Construct with μ_R chosen so the pricing identity E(MR) = 1 holds:
    /// μ_M·μ_R + ρ·σ_R·σ_M = 1.
    pub fn euler_consistent(mu_m: f64, sigma_m: f64, sigma_r: f64, rho: f64) -> Self {
        JointNormalParams {
            mu_r: (1.0 - rho * sigma_r * sigma_m) / mu_m,
            sigma_r,
            mu_m,
            sigma_m,
            rho,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.sigma_r <= 0.0 || self.sigma_m <= 0.0 {
            return Err(ModelError::InvalidParams("volatilities must be positive".into()));
        }
        if self.rho.abs() >= 1.0 {
            return Err(ModelError::InvalidParams("|rho| must be below 1".into()));
        }
        if self.mu_m <= 0.0 {
            return Err(ModelError::InvalidParams(
                "mean SDF must be positive for a positive risk-free rate".into(),
            ));
        }
        Ok(())
    }

    /// Deviation from the pricing identity E(MR) − 1.
    pub fn euler_gap(&self) -> f64 {
        self.mu_m * self.mu_r + self.rho * self.sigma_r * self.sigma_m - 1.0
    }

    pub fn risk_free(&self) -> f64 {
        1.0 / self.mu_m
    }

    pub fn physical_cdf(&self, x: f64) -> f64 {
        norm_cdf((x - self.mu_r) / self.sigma_r)
    }

    /// Risk-neutral CDF E[M·1{R ≤ x}]/E(M) in closed form:
    /// Φ(z) − (ρσ_M/μ_M)·ϕ(z) with z = (x − μ_R)/σ_R.
    pub fn rn_cdf(&self, x: f64) -> f64 {
        let z = (x - self.mu_r) / self.sigma_r;
        norm_cdf(z) - self.rho * self.sigma_m / self.mu_m * norm_pdf(z)
    }

    /// Risk-neutral quantile by bisection (the tilt has no closed inverse).
    pub fn rn_quantile(&self, tau: f64) -> f64 {
        let lo = self.mu_r - 12.0 * self.sigma_r;
        let hi = self.mu_r + 12.0 * self.sigma_r;
        bisect(|x| self.rn_cdf(x) - tau, lo, hi, 1e-12 * self.sigma_r, 200)
            .expect("risk-neutral CDF brackets every interior tau")
    }

    pub fn odc_phi(&self, tau: f64) -> f64 {
        self.physical_cdf(self.rn_quantile(tau))
    }

    pub fn hj(&self) -> f64 {
        let rf = self.risk_free();
        (self.mu_r - rf).abs() / (self.sigma_r * rf)
    }

    pub fn sdf_vol(&self) -> f64 {
        self.sigma_m / self.mu_m
    }

    /// Draw (R, M) pairs.
    pub fn sample(&self, rng: &mut impl Rng) -> (f64, f64) {
        let z1: f64 = normal_draw(rng);
        let z2: f64 = normal_draw(rng);
        let r = self.mu_r + self.sigma_r * z1;
        let m = self.mu_m
            + self.sigma_m * (self.rho * z1 + (1.0 - self.rho * self.rho).sqrt() * z2);
        (r, m)
    }
}

fn normal_draw(rng: &mut impl Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Both sides of the covariance identity
/// −COV(1{R≤x}, M) = f_R(x)·COV(R, M) for jointly normal (R, M),
/// estimated by Monte Carlo on the left and by the marginal normal density
/// times the Monte Carlo covariance on the right.
#[derive(Debug, Clone, Copy)]
pub struct HoeffdingCheck {
    pub lhs: f64,
    pub rhs: f64,
}

pub fn hoeffding_check(
    model: &JointNormalParams,
    x: f64,
    n_draws: usize,
    seed: u64,
) -> HoeffdingCheck {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut rs = Vec::with_capacity(n_draws);
    let mut ms = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let (r, m) = model.sample(&mut rng);
        rs.push(r);
        ms.push(m);
    }
    let inv = 1.0 / n_draws as f64;
    let mean_m: f64 = ms.iter().sum::<f64>() * inv;
    let mean_r: f64 = rs.iter().sum::<f64>() * inv;
    let mut cov_ind_m = 0.0;
    let mut cov_r_m = 0.0;
    let p_ind: f64 = rs.iter().filter(|&&r| r <= x).count() as f64 * inv;
    for (&r, &m) in rs.iter().zip(&ms) {
        let ind = if r <= x { 1.0 } else { 0.0 };
        cov_ind_m += (ind - p_ind) * (m - mean_m) * inv;
        cov_r_m += (r - mean_r) * (m - mean_m) * inv;
    }
    let dens = norm_pdf((x - model.mu_r) / model.sigma_r) / model.sigma_r;
    HoeffdingCheck {
        lhs: -cov_ind_m,
        rhs: dens * cov_r_m,
    }
}

/// Bivariate lognormal model: log R and log M are jointly normal with
/// per-unit-time parameters and a time scale λ, so that over the horizon
/// log R ~ N((μ_R − σ_R²/2)λ, σ_R²λ) and the gross risk-free rate is
/// exp(r_f·λ). The pricing identity holds exactly when
/// μ_R − r_f = −ρ·σ_R·σ_M.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LognormalParams {
    pub mu_r: f64,
    pub sigma_r: f64,
    pub r_f: f64,
    pub sigma_m: f64,
    pub rho: f64,
    pub lambda: f64,
}

impl LognormalParams {
    /// Construct with μ_R set by the pricing identity μ_R = r_f − ρσ_Rσ_M.
    pub fn euler_consistent(r_f: f64, sigma_r: f64, sigma_m: f64, rho: f64, lambda: f64) -> Self {
        LognormalParams {
            mu_r: r_f - rho * sigma_r * sigma_m,
            sigma_r,
            r_f,
            sigma_m,
            rho,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.sigma_r <= 0.0 || self.sigma_m <= 0.0 || self.lambda <= 0.0 {
            return Err(ModelError::InvalidParams(
                "volatilities and time scale must be positive".into(),
            ));
        }
        if self.rho.abs() >= 1.0 {
            return Err(ModelError::InvalidParams("|rho| must be below 1".into()));
        }
        Ok(())
    }

    /// Deviation from the pricing identity μ_R − r_f + ρσ_Rσ_M.
    pub fn euler_gap(&self) -> f64 {
        self.mu_r - self.r_f + self.rho * self.sigma_r * self.sigma_m
    }

    fn s_r(&self) -> f64 {
        self.sigma_r * self.lambda.sqrt()
    }

    fn s_m(&self) -> f64 {
        self.sigma_m * self.lambda.sqrt()
    }

    fn a_r(&self) -> f64 {
        (self.mu_r - 0.5 * self.sigma_r * self.sigma_r) * self.lambda
    }

    pub fn risk_free(&self) -> f64 {
        (self.r_f * self.lambda).exp()
    }

    pub fn expected_return(&self) -> f64 {
        (self.mu_r * self.lambda).exp()
    }

    pub fn return_sd(&self) -> f64 {
        self.expected_return() * ((self.s_r() * self.s_r()).exp_m1()).sqrt()
    }

    pub fn physical_cdf(&self, x: f64) -> Result<f64, ModelError> {
        if x <= 0.0 {
            return Err(ModelError::OutOfSupport { x });
        }
        Ok(norm_cdf((x.ln() - self.a_r()) / self.s_r()))
    }

    /// Esscher tilt by the lognormal SDF shifts the log-return mean by
    /// ρ·s_R·s_M; the variance is unchanged.
    pub fn rn_cdf(&self, x: f64) -> Result<f64, ModelError> {
        if x <= 0.0 {
            return Err(ModelError::OutOfSupport { x });
        }
        Ok(norm_cdf(
            (x.ln() - self.a_r() - self.rho * self.s_r() * self.s_m()) / self.s_r(),
        ))
    }

    pub fn rn_quantile(&self, tau: f64) -> f64 {
        (self.a_r() + self.rho * self.s_r() * self.s_m() + self.s_r() * norm_ppf(tau)).exp()
    }

    pub fn physical_quantile(&self, tau: f64) -> f64 {
        (self.a_r() + self.s_r() * norm_ppf(tau)).exp()
    }

    /// φ(τ) = Φ(z_τ + ρ·σ_M·√λ): an exact one-parameter shift of the
    /// standard-normal quantile.
    pub fn odc_phi(&self, tau: f64) -> f64 {
        norm_cdf(norm_ppf(tau) + self.rho * self.s_m())
    }

    pub fn hj(&self) -> f64 {
        let rf = self.risk_free();
        (self.expected_return() - rf).abs() / (self.return_sd() * rf)
    }

    /// σ(M)/E(M) = √(exp(σ_M²λ) − 1) for a lognormal SDF.
    pub fn sdf_vol(&self) -> f64 {
        ((self.s_m() * self.s_m()).exp_m1()).sqrt()
    }
}

/// Closed-form minimum over τ of the ratio HJ/local for the lognormal model
/// in the small-SDF-volatility limit: (1/2)·√(2πσ_R²λ / (exp(σ_R²λ) − 1)).
///
/// The expression depends only on σ_R²λ; it converges to √(2π)/2 ≈ 1.2533 as
/// λ → 0⁺ and crosses 1 near σ_R ≈ 0.92 at λ = 1, the point where the local
/// bound starts beating the HJ bound somewhere on the τ-grid.
pub fn lognormal_efficiency(model: &LognormalParams) -> f64 {
    let v = model.sigma_r * model.sigma_r * model.lambda;
    0.5 * (2.0 * std::f64::consts::PI * v / v.exp_m1()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn joint_normal_rn_cdf_matches_tilted_monte_carlo() {
        let m = JointNormalParams::euler_consistent(0.97, 0.2, 0.18, -0.5);
        m.validate().unwrap();
        assert_abs_diff_eq!(m.euler_gap(), 0.0, epsilon = 1e-15);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let n = 400_000;
        let x = m.mu_r - 0.8 * m.sigma_r;
        let mut num = 0.0;
        let mut den = 0.0;
        for _ in 0..n {
            let (r, sdf) = m.sample(&mut rng);
            den += sdf;
            if r <= x {
                num += sdf;
            }
        }
        let mc = num / den;
        assert!(
            (m.rn_cdf(x) - mc).abs() < 0.005,
            "closed form {} vs MC {mc}",
            m.rn_cdf(x)
        );
    }

    #[test]
    fn joint_normal_quantile_inverts() {
        let m = JointNormalParams::euler_consistent(0.95, 0.25, 0.3, -0.7);
        for tau in [0.01, 0.05, 0.5, 0.9, 0.99] {
            assert_abs_diff_eq!(m.rn_cdf(m.rn_quantile(tau)), tau, epsilon = 1e-9);
        }
    }

    #[test]
    fn hoeffding_identity_zero_when_independent() {
        let m = JointNormalParams {
            mu_r: 1.06,
            sigma_r: 0.2,
            mu_m: 0.95,
            sigma_m: 0.2,
            rho: 0.0,
        };
        let chk = hoeffding_check(&m, m.mu_r, 200_000, 11);
        assert!(chk.lhs.abs() < 3.0 * 0.2 / (200_000f64).sqrt() * 3.0);
        assert!(chk.rhs.abs() < 1e-3);
    }

    #[test]
    fn hoeffding_density_factor_at_mean() {
        let m = JointNormalParams::euler_consistent(0.96, 0.2, 0.25, -0.5);
        let chk = hoeffding_check(&m, m.mu_r, 500_000, 21);
        // rhs uses f(μ_R) = 1/√(2πσ_R²).
        let dens = 1.0 / (2.0 * std::f64::consts::PI * m.sigma_r * m.sigma_r).sqrt();
        let cov_rm = chk.rhs / dens;
        assert!((cov_rm - m.rho * m.sigma_r * m.sigma_m).abs() < 5e-4);
        assert!((chk.lhs - chk.rhs).abs() < 3.0 * 1e-3);
    }

    #[test]
    fn lognormal_prop1_rotation_exact_under_euler() {
        let m = LognormalParams::euler_consistent(0.02, 0.2, 0.4, -0.6, 1.0 / 12.0);
        let scale = ((m.mu_r - m.r_f) * m.lambda).exp();
        for tau in [0.01, 0.05, 0.5, 0.95] {
            assert_abs_diff_eq!(
                m.physical_quantile(tau),
                scale * m.rn_quantile(tau),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn lognormal_efficiency_limits() {
        let mut m = LognormalParams::euler_consistent(0.01, 0.3, 0.1, -0.4, 1e-9);
        assert_abs_diff_eq!(
            lognormal_efficiency(&m),
            (2.0 * std::f64::consts::PI).sqrt() / 2.0,
            epsilon = 1e-3
        );
        m.lambda = 1.0;
        m.sigma_r = 0.92;
        let near_one = lognormal_efficiency(&m);
        assert!((near_one - 1.0).abs() < 0.01, "threshold case: {near_one}");
    }

    #[test]
    fn linear_sdf_attains_hj_bound() {
        // CAPM-style check: M = a − bR prices R and the risk-free asset, and
        // its volatility equals the HJ lower bound (Cauchy–Schwarz binds).
        let (mu_r, sigma_r, rf) = (1.07, 0.18, 1.01);
        let b = (mu_r - rf) / (rf * sigma_r * sigma_r);
        let a = 1.0 / rf + b * mu_r;
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 500_000;
        let (mut sm, mut smm, mut smr) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let r = mu_r + sigma_r * normal_draw(&mut rng);
            let m = a - b * r;
            sm += m;
            smm += m * m;
            smr += m * r;
        }
        let inv = 1.0 / n as f64;
        let (em, em2, emr) = (sm * inv, smm * inv, smr * inv);
        assert!((em - 1.0 / rf).abs() < 1e-3);
        assert!((emr - 1.0).abs() < 1e-3);
        let sd_m = (em2 - em * em).sqrt();
        let hj = (mu_r - rf).abs() / (sigma_r * rf);
        assert!(
            (sd_m - hj).abs() < 0.01 * hj.max(0.01),
            "σ(M) = {sd_m} vs HJ = {hj}"
        );
    }
}
