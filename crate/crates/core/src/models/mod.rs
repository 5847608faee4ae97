//! Analytic model zoo: closed-form physical and risk-neutral return laws,
//! SDF moment diagnostics, exact bound curves, and the simulation
//! data-generating processes used as oracles by the estimation pipeline.
//!
//! A note on the CAPM-style linear SDF M = a − bR: it carries no computation
//! of its own here because the Hansen–Jagannathan bound binds it exactly
//! (Cauchy–Schwarz holds with equality for an SDF linear in the return); the
//! property is covered by a Monte Carlo check in the test suite, and the
//! joint-normal variant subsumes its distributional content.

pub mod agent;
pub mod disaster;
pub mod gauss;
pub mod pareto;
pub mod sim;

pub use agent::{
    crra_equity_premium, equity_premium, exp_equity_premium, physical_cdf_crra,
    tau_minus_f_at_rn_quantile, Utility,
};
pub use disaster::{DisasterParams, J_MAX};
pub use gauss::{
    hoeffding_check, lognormal_efficiency, HoeffdingCheck, JointNormalParams, LognormalParams,
};
pub use pareto::ParetoParams;
pub use sim::{simulate_dgp, DgpConfig, DgpKind, DgpOutput, PeriodParams};

use crate::bounds::BoundCurve;
use crate::rnd::MeasureTag;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("evaluation point {x} lies outside the model's support")]
    OutOfSupport { x: f64 },
    #[error("required moment undefined: {0}")]
    MomentUndefined(String),
    #[error("tilted expectation diverges: {0}")]
    DivergentTilt(String),
    #[error("unsupported utility: {0}")]
    UnsupportedUtility(String),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
}

/// A parametric asset-pricing model with closed-form return distributions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ModelSpec {
    JointNormal(JointNormalParams),
    Lognormal(LognormalParams),
    Pareto(ParetoParams),
    Disaster(DisasterParams),
    /// Representative agent with the given utility over an externally
    /// supplied risk-neutral distribution; see [`agent`].
    RepAgent { utility: Utility },
}

/// Local bound curve together with the scalar HJ bound and the model's
/// exact SDF volatility ratio σ(M)/E(M).
#[derive(Debug, Clone, Serialize)]
pub struct ModelBounds {
    pub local: BoundCurve,
    pub hj: f64,
    pub sdf_vol: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ModelSpec::JointNormal(p) => p.validate(),
            ModelSpec::Lognormal(p) => p.validate(),
            ModelSpec::Pareto(p) => p.validate(),
            ModelSpec::Disaster(p) => p.validate(),
            ModelSpec::RepAgent { utility } => utility.validate(),
        }
    }

    /// Gross risk-free rate implied by the model's SDF.
    pub fn risk_free(&self) -> Result<f64, ModelError> {
        match self {
            ModelSpec::JointNormal(p) => Ok(p.risk_free()),
            ModelSpec::Lognormal(p) => Ok(p.risk_free()),
            ModelSpec::Pareto(p) => Ok(p.risk_free()),
            ModelSpec::Disaster(p) => Ok(p.risk_free()),
            ModelSpec::RepAgent { .. } => Err(ModelError::InvalidParams(
                "a representative-agent overlay has no intrinsic risk-free rate; \
                 it inherits one from the base distribution"
                    .into(),
            )),
        }
    }

    /// Closed-form CDF of the gross market return under either measure.
    pub fn cdf(&self, measure: MeasureTag, x: f64) -> Result<f64, ModelError> {
        match self {
            ModelSpec::JointNormal(p) => Ok(match measure {
                MeasureTag::Physical => p.physical_cdf(x),
                MeasureTag::RiskNeutral => p.rn_cdf(x),
            }),
            ModelSpec::Lognormal(p) => match measure {
                MeasureTag::Physical => p.physical_cdf(x),
                MeasureTag::RiskNeutral => p.rn_cdf(x),
            },
            ModelSpec::Pareto(p) => match measure {
                MeasureTag::Physical => p.physical_cdf(x),
                MeasureTag::RiskNeutral => p.rn_cdf(x),
            },
            ModelSpec::Disaster(p) => match measure {
                MeasureTag::Physical => p.physical_return_cdf(x),
                MeasureTag::RiskNeutral => p.rn_return_cdf(x),
            },
            ModelSpec::RepAgent { .. } => Err(ModelError::InvalidParams(
                "use physical_cdf_crra with a base risk-neutral distribution".into(),
            )),
        }
    }

    /// Exact ordinal dominance value φ(τ) = F(Q̃(τ)).
    pub fn odc_phi(&self, tau: f64) -> Result<f64, ModelError> {
        match self {
            ModelSpec::JointNormal(p) => Ok(p.odc_phi(tau)),
            ModelSpec::Lognormal(p) => Ok(p.odc_phi(tau)),
            ModelSpec::Pareto(p) => Ok(p.odc_phi(tau)),
            ModelSpec::Disaster(p) => Ok(p.odc_phi(tau)),
            ModelSpec::RepAgent { .. } => Err(ModelError::InvalidParams(
                "no intrinsic return law".into(),
            )),
        }
    }

    /// Exact local-bound curve, HJ bound, and SDF volatility.
    pub fn local_and_hj(&self, taus: &[f64]) -> Result<ModelBounds, ModelError> {
        self.validate()?;
        let rf = self.risk_free()?;
        let mut values = Vec::with_capacity(taus.len());
        for &t in taus {
            let phi = self.odc_phi(t)?;
            values.push(crate::bounds::local_bound_value(t, phi, rf));
        }
        let local = BoundCurve {
            taus: taus.to_vec(),
            values,
            kind: crate::bounds::BoundKind::Local,
            rf,
        };
        let (hj, sdf_vol) = match self {
            ModelSpec::JointNormal(p) => (p.hj(), p.sdf_vol()),
            ModelSpec::Lognormal(p) => (p.hj(), p.sdf_vol()),
            ModelSpec::Pareto(p) => (p.hj()?, p.sdf_vol()),
            ModelSpec::Disaster(p) => (p.hj(), p.sdf_vol()),
            ModelSpec::RepAgent { .. } => unreachable!("rejected by risk_free above"),
        };
        Ok(ModelBounds {
            local,
            hj,
            sdf_vol,
        })
    }
}
