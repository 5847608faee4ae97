//! Rare-disaster consumption model with power utility.
//!
//! Log consumption growth is a Poisson mixture of normals,
//! Δc = ε + η with ε ~ N(μ, σ²) and η | (J = j) ~ N(jθ, jν²), J ~ Poisson(κ),
//! and the SDF is M = β·exp(−γΔc). The market return is a claim on levered
//! consumption, R = c₀·exp(λ·Δc), with the constant c₀ pinned down so that
//! the return is priced, Ẽ(R) = R_f. Changing to the risk-neutral measure
//! leaves the mixture family intact with tilted parameters
//! κ̃ = κ·e^{−γθ + (γν)²/2}, θ̃ = θ − γν², μ̃ = μ − γσ² (σ and ν unchanged).
//! The default calibration ships in `assets/disaster_default.toml`,
//! transcribed from Backus, Chernov & Martin (2011).

use super::ModelError;
use crate::math::bisect;
use crate::rnd::{DistributionEstimate, MeasureTag};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Truncation order of the Poisson sum. For κ ≤ 2 the neglected tail mass is
/// below 1e−12 (Poisson tail bound), and for calibrated κ values near 0.01 it
/// is smaller than 1e−40.
pub const J_MAX: usize = 20;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DisasterParams {
    pub beta_discount: f64,
    pub gamma: f64,
    pub mu: f64,
    pub sigma: f64,
    pub theta_jump: f64,
    pub nu: f64,
    pub kappa: f64,
    pub lambda_leverage: f64,
}

impl Default for DisasterParams {
    /// The shipped calibration file, parsed at construction.
    fn default() -> Self {
        toml::from_str(include_str!("assets/disaster_default.toml"))
            .expect("shipped disaster calibration must parse")
    }
}

/// Poisson-mixture jump-diffusion parameters for Δc under one measure.
#[derive(Debug, Clone, Copy)]
struct JumpMix {
    mu: f64,
    sigma: f64,
    theta: f64,
    nu: f64,
    kappa: f64,
}

impl JumpMix {
    fn pmf(&self) -> [f64; J_MAX + 1] {
        let mut p = [0.0; J_MAX + 1];
        p[0] = (-self.kappa).exp();
        for j in 1..=J_MAX {
            p[j] = p[j - 1] * self.kappa / j as f64;
        }
        p
    }

    fn component_sd(&self, j: usize) -> f64 {
        (self.sigma * self.sigma + j as f64 * self.nu * self.nu).sqrt()
    }

    fn cdf(&self, z: f64) -> f64 {
        let pmf = self.pmf();
        let mut acc = 0.0;
        for (j, &pj) in pmf.iter().enumerate() {
            let s = self.component_sd(j);
            acc += pj * crate::math::norm_cdf((z - self.mu - j as f64 * self.theta) / s);
        }
        acc
    }

    fn pdf(&self, z: f64) -> f64 {
        let pmf = self.pmf();
        let mut acc = 0.0;
        for (j, &pj) in pmf.iter().enumerate() {
            let s = self.component_sd(j);
            acc += pj * crate::math::norm_pdf((z - self.mu - j as f64 * self.theta) / s) / s;
        }
        acc
    }

    fn quantile(&self, tau: f64) -> f64 {
        let reach = 10.0 * (self.sigma + self.nu * (J_MAX as f64).sqrt());
        let lo = self.mu - self.theta.abs() * J_MAX as f64 - reach;
        let hi = self.mu + self.theta.abs() * J_MAX as f64 + reach;
        bisect(|z| self.cdf(z) - tau, lo, hi, 1e-14 * (hi - lo).abs(), 200)
            .expect("mixture CDF is continuous and spans (0,1)")
    }
}

impl DisasterParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.beta_discount <= 0.0 || self.sigma <= 0.0 || self.nu < 0.0 {
            return Err(ModelError::InvalidParams(
                "discount factor and diffusion volatility must be positive".into(),
            ));
        }
        if self.kappa < 0.0 {
            return Err(ModelError::InvalidParams("jump intensity must be nonnegative".into()));
        }
        if self.kappa > 2.0 {
            return Err(ModelError::InvalidParams(format!(
                "jump intensity {} too large for the series truncation at {J_MAX}",
                self.kappa
            )));
        }
        if self.lambda_leverage == 0.0 {
            return Err(ModelError::InvalidParams("leverage must be nonzero".into()));
        }
        Ok(())
    }

    fn physical_mix(&self) -> JumpMix {
        JumpMix {
            mu: self.mu,
            sigma: self.sigma,
            theta: self.theta_jump,
            nu: self.nu,
            kappa: self.kappa,
        }
    }

    fn tilted_mix(&self) -> JumpMix {
        JumpMix {
            mu: self.rn_mu(),
            sigma: self.sigma,
            theta: self.rn_theta(),
            nu: self.nu,
            kappa: self.rn_kappa(),
        }
    }

    /// Risk-neutral jump intensity κ̃ = κ·e^{−γθ + (γν)²/2}.
    pub fn rn_kappa(&self) -> f64 {
        self.kappa
            * (-self.gamma * self.theta_jump
                + 0.5 * (self.gamma * self.nu) * (self.gamma * self.nu))
                .exp()
    }

    /// Risk-neutral jump mean θ̃ = θ − γν².
    pub fn rn_theta(&self) -> f64 {
        self.theta_jump - self.gamma * self.nu * self.nu
    }

    /// Risk-neutral diffusion mean μ̃ = μ − γσ².
    pub fn rn_mu(&self) -> f64 {
        self.mu - self.gamma * self.sigma * self.sigma
    }

    /// Moment generating function of Δc under the physical measure:
    /// E e^{sΔc} = exp(sμ + s²σ²/2 + κ(e^{sθ + s²ν²/2} − 1)).
    pub fn mgf(&self, s: f64) -> f64 {
        (s * self.mu
            + 0.5 * s * s * self.sigma * self.sigma
            + self.kappa
                * ((s * self.theta_jump + 0.5 * s * s * self.nu * self.nu).exp() - 1.0))
            .exp()
    }

    /// E(M) = β·E e^{−γΔc}.
    pub fn sdf_mean(&self) -> f64 {
        self.beta_discount * self.mgf(-self.gamma)
    }

    pub fn sdf_sd(&self) -> f64 {
        let m2 = self.beta_discount * self.beta_discount * self.mgf(-2.0 * self.gamma);
        (m2 - self.sdf_mean().powi(2)).max(0.0).sqrt()
    }

    pub fn sdf_vol(&self) -> f64 {
        self.sdf_sd() / self.sdf_mean()
    }

    pub fn risk_free(&self) -> f64 {
        1.0 / self.sdf_mean()
    }

    /// Normalizing constant of the levered-consumption return, chosen so the
    /// return is priced: E(M·c₀e^{λΔc}) = 1, i.e. c₀ = 1/(β·mgf(λ − γ)).
    pub fn return_scale(&self) -> f64 {
        1.0 / (self.beta_discount * self.mgf(self.lambda_leverage - self.gamma))
    }

    pub fn expected_return(&self) -> f64 {
        self.return_scale() * self.mgf(self.lambda_leverage)
    }

    pub fn return_sd(&self) -> f64 {
        let c0 = self.return_scale();
        let m2 = c0 * c0 * self.mgf(2.0 * self.lambda_leverage);
        (m2 - self.expected_return().powi(2)).max(0.0).sqrt()
    }

    fn growth_from_return(&self, x: f64) -> Result<f64, ModelError> {
        if x <= 0.0 {
            return Err(ModelError::OutOfSupport { x });
        }
        Ok((x / self.return_scale()).ln() / self.lambda_leverage)
    }

    /// Physical CDF of the gross market return.
    pub fn physical_return_cdf(&self, x: f64) -> Result<f64, ModelError> {
        let z = self.growth_from_return(x)?;
        let mix = self.physical_mix();
        Ok(if self.lambda_leverage > 0.0 {
            mix.cdf(z)
        } else {
            1.0 - mix.cdf(z)
        })
    }

    /// Risk-neutral CDF of the gross market return (tilted mixture).
    pub fn rn_return_cdf(&self, x: f64) -> Result<f64, ModelError> {
        let z = self.growth_from_return(x)?;
        let mix = self.tilted_mix();
        Ok(if self.lambda_leverage > 0.0 {
            mix.cdf(z)
        } else {
            1.0 - mix.cdf(z)
        })
    }

    pub fn rn_return_quantile(&self, tau: f64) -> f64 {
        let mix = self.tilted_mix();
        let t = if self.lambda_leverage > 0.0 {
            tau
        } else {
            1.0 - tau
        };
        self.return_scale() * (self.lambda_leverage * mix.quantile(t)).exp()
    }

    /// φ(τ): physical probability of the risk-neutral τ-quantile event. The
    /// monotone return map cancels, so this composes the two mixture CDFs of
    /// consumption growth directly.
    pub fn odc_phi(&self, tau: f64) -> f64 {
        if self.lambda_leverage > 0.0 {
            self.physical_mix().cdf(self.tilted_mix().quantile(tau))
        } else {
            1.0 - self.physical_mix().cdf(self.tilted_mix().quantile(1.0 - tau))
        }
    }

    pub fn hj(&self) -> f64 {
        let rf = self.risk_free();
        (self.expected_return() - rf).abs() / (self.return_sd() * rf)
    }

    /// Draw one consumption-growth realization.
    pub fn sample_growth(&self, rng: &mut impl Rng) -> f64 {
        // Poisson count by inversion of the CDF (κ is small).
        let pmf = self.physical_mix().pmf();
        let u: f64 = rng.gen();
        let mut j = J_MAX;
        let mut acc = 0.0;
        for (k, &p) in pmf.iter().enumerate() {
            acc += p;
            if u <= acc {
                j = k;
                break;
            }
        }
        let z1 = normal_draw(rng);
        let z2 = normal_draw(rng);
        let jf = j as f64;
        self.mu + self.sigma * z1 + jf * self.theta_jump + self.nu * jf.sqrt() * z2
    }

    /// Draw one gross market return.
    pub fn sample_return(&self, rng: &mut impl Rng) -> f64 {
        self.return_scale() * (self.lambda_leverage * self.sample_growth(rng)).exp()
    }

    /// Exact risk-neutral return distribution tabulated on a quantile-spanning
    /// grid, for feeding the estimation pipeline with model-implied option
    /// information.
    pub fn rn_distribution(
        &self,
        n_points: usize,
        horizon_days: i64,
    ) -> DistributionEstimate {
        let lo = self.rn_return_quantile(2e-4) * 0.98;
        let hi = self.rn_return_quantile(1.0 - 2e-4) * 1.02;
        let c0 = self.return_scale();
        let lam = self.lambda_leverage;
        let mix = self.tilted_mix();
        let grid: Vec<f64> = (0..n_points)
            .map(|i| lo + (hi - lo) * i as f64 / (n_points - 1) as f64)
            .collect();
        let cdf: Vec<f64> = grid
            .iter()
            .map(|&x| {
                let f = mix.cdf((x / c0).ln() / lam);
                if lam > 0.0 {
                    f
                } else {
                    1.0 - f
                }
            })
            .collect();
        let pdf: Vec<f64> = grid
            .iter()
            .map(|&x| mix.pdf((x / c0).ln() / lam) / (lam.abs() * x))
            .collect();
        DistributionEstimate::new(
            grid,
            cdf,
            pdf,
            MeasureTag::RiskNeutral,
            None,
            horizon_days,
            None,
        )
        .expect("analytic disaster distribution is well formed")
    }
}

fn normal_draw(rng: &mut impl Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}
