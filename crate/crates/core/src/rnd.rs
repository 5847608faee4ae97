//! Risk-neutral distribution estimation from option chains.
//!
//! The pipeline converts cleaned midprices to Black–Scholes implied
//! volatilities, interpolates the smile in strike with a monotone cubic,
//! extrapolates the tails flat in vol, reprices puts on a dense moneyness
//! grid, and differentiates the put curve to obtain the risk-neutral CDF
//! (and a second difference for the density), followed by clipping and
//! isotonization. It also provides maturity interpolation in total implied
//! variance, quantile curves, unconditional averages, and (truncated)
//! risk-neutral moments computed from the quantile function.

use crate::market_data::{OptionChain, OptionFlag};
use crate::math::{
    interp_clamped, isotonic_nondecreasing, norm_cdf, quantile_from_cdf, trapezoid, Pchip,
};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probability measure a distribution is stated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureTag {
    Physical,
    RiskNeutral,
}

/// What the values of a [`QuantileCurve`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticsTag {
    RnQuantile,
    PhysicalQuantile,
    Bound,
    Odc,
    RiskAdjustment,
}

/// Implied-volatility smile metadata kept alongside a fitted distribution so
/// that maturity interpolation can work in total-variance space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IvSmile {
    /// Moneyness abscissae (strike / spot), strictly increasing.
    pub moneyness: Vec<f64>,
    /// Implied volatility at each moneyness point.
    pub vol: Vec<f64>,
    /// Time to expiry in years.
    pub t_years: f64,
    /// Gross risk-free rate over the maturity.
    pub rf: f64,
    /// Forward price divided by spot.
    pub forward_moneyness: f64,
}

/// A distribution on a common gross-return grid: CDF, density, and measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionEstimate {
    /// Strictly increasing gross-return abscissae.
    pub grid: Vec<f64>,
    /// Nondecreasing CDF values in [0,1].
    pub cdf: Vec<f64>,
    /// Density values ≥ 0.
    pub pdf: Vec<f64>,
    pub measure_tag: MeasureTag,
    pub date: Option<NaiveDate>,
    pub horizon_days: i64,
    /// Present only for option-implied fits.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iv_smile: Option<IvSmile>,
}

/// A map τ → value on a fixed τ-grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantileCurve {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub semantics_tag: SemanticsTag,
}

#[derive(Debug, Error)]
pub enum RndError {
    #[error("chain has {found} usable strikes spanning [{lo:.3}, {hi:.3}]; need ≥ {need} spanning [0.7, 1.1]")]
    TooFewStrikes {
        found: usize,
        need: usize,
        lo: f64,
        hi: f64,
    },
    #[error("implied-vol bisection failed on {dropped}/{total} quotes (more than 20%)")]
    NonconvergentImpliedVol { dropped: usize, total: usize },
    #[error("distributions have mixed horizons: {0} vs {1} days")]
    MixedHorizon(i64, i64),
    #[error("target horizon {target} days does not lie between {lo} and {hi}")]
    BracketingError { target: i64, lo: i64, hi: i64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

/// Return-grid configuration for distribution fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_points: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_points: 2001,
            lo: 0.3,
            hi: 2.0,
        }
    }
}

impl DistributionEstimate {
    /// Validating constructor; enforces the structural invariants.
    pub fn new(
        grid: Vec<f64>,
        cdf: Vec<f64>,
        pdf: Vec<f64>,
        measure_tag: MeasureTag,
        date: Option<NaiveDate>,
        horizon_days: i64,
        iv_smile: Option<IvSmile>,
    ) -> Result<Self, RndError> {
        if grid.len() != cdf.len() || grid.len() != pdf.len() || grid.len() < 2 {
            return Err(RndError::InvalidDistribution(
                "grid/cdf/pdf length mismatch or too short".into(),
            ));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RndError::InvalidDistribution(
                "grid not strictly increasing".into(),
            ));
        }
        if cdf.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            return Err(RndError::InvalidDistribution("cdf not nondecreasing".into()));
        }
        if cdf.iter().any(|&c| !(-1e-12..=1.0 + 1e-12).contains(&c)) {
            return Err(RndError::InvalidDistribution("cdf outside [0,1]".into()));
        }
        if cdf[0] > 0.005 {
            return Err(RndError::InvalidDistribution(format!(
                "cdf at grid start is {:.4}, want ≤ 0.005 (left tail not covered)",
                cdf[0]
            )));
        }
        if cdf[cdf.len() - 1] < 0.995 {
            return Err(RndError::InvalidDistribution(format!(
                "cdf at grid end is {:.4}, want ≥ 0.995 (right tail not covered)",
                cdf[cdf.len() - 1]
            )));
        }
        if pdf.iter().any(|&p| p < -1e-12) {
            return Err(RndError::InvalidDistribution("negative density".into()));
        }
        let mass = trapezoid(&grid, &pdf);
        if !(0.99..=1.01).contains(&mass) {
            return Err(RndError::InvalidDistribution(format!(
                "density integrates to {mass:.4}, want within [0.99, 1.01]"
            )));
        }
        Ok(DistributionEstimate {
            grid,
            cdf,
            pdf,
            measure_tag,
            date,
            horizon_days,
            iv_smile,
        })
    }

    /// Build from closed-form CDF and pdf functions sampled on a grid.
    pub fn from_functions(
        grid: Vec<f64>,
        cdf_fn: impl Fn(f64) -> f64,
        pdf_fn: impl Fn(f64) -> f64,
        measure_tag: MeasureTag,
        horizon_days: i64,
    ) -> Result<Self, RndError> {
        let cdf: Vec<f64> = grid.iter().map(|&x| cdf_fn(x)).collect();
        let pdf: Vec<f64> = grid.iter().map(|&x| pdf_fn(x)).collect();
        DistributionEstimate::new(grid, cdf, pdf, measure_tag, None, horizon_days, None)
    }

    /// CDF at an arbitrary point by clamped linear interpolation.
    pub fn cdf_at(&self, x: f64) -> f64 {
        interp_clamped(&self.grid, &self.cdf, x)
    }

    /// Density at an arbitrary point by clamped linear interpolation.
    pub fn pdf_at(&self, x: f64) -> f64 {
        interp_clamped(&self.grid, &self.pdf, x)
    }

    /// Generalized-inverse quantile: inf{x : F(x) ≥ p}, clamped to the grid.
    pub fn quantile(&self, p: f64) -> f64 {
        quantile_from_cdf(&self.grid, &self.cdf, p)
    }
}

// ---------- Black–Scholes pricing and implied vol ----------

/// Undiscounted-forward Black put price per unit of spot: strike and forward
/// expressed as moneyness (K/S, F/S), discounted by the gross rate.
pub fn bs_put_unit(m: f64, fwd_m: f64, vol: f64, t_years: f64, rf: f64) -> f64 {
    let st = vol * t_years.sqrt();
    if st < 1e-12 {
        return (m - fwd_m).max(0.0) / rf;
    }
    let d1 = ((fwd_m / m).ln() + 0.5 * st * st) / st;
    let d2 = d1 - st;
    (m * norm_cdf(-d2) - fwd_m * norm_cdf(-d1)) / rf
}

/// Black call price per unit of spot, same conventions as [`bs_put_unit`].
pub fn bs_call_unit(m: f64, fwd_m: f64, vol: f64, t_years: f64, rf: f64) -> f64 {
    let st = vol * t_years.sqrt();
    if st < 1e-12 {
        return (fwd_m - m).max(0.0) / rf;
    }
    let d1 = ((fwd_m / m).ln() + 0.5 * st * st) / st;
    let d2 = d1 - st;
    (fwd_m * norm_cdf(d1) - m * norm_cdf(d2)) / rf
}

/// Implied volatility by bisection to 1e-8 in vol (max 200 iterations).
/// Prices at or below the zero-vol limit return the vol floor; prices above
/// the σ=5 price are unattainable and yield `None`.
pub fn implied_vol(
    price_unit: f64,
    m: f64,
    fwd_m: f64,
    t_years: f64,
    rf: f64,
    flag: OptionFlag,
) -> Option<f64> {
    let price_at = |vol: f64| match flag {
        OptionFlag::Put => bs_put_unit(m, fwd_m, vol, t_years, rf),
        OptionFlag::Call => bs_call_unit(m, fwd_m, vol, t_years, rf),
    };
    let (mut lo, mut hi) = (1e-6f64, 5.0f64);
    if price_unit <= price_at(lo) {
        return Some(lo);
    }
    if price_unit >= price_at(hi) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if price_at(mid) < price_unit {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-8 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

// ---------- fitting ----------

/// Price a put curve from a smile on `grid` (flat tails) and differentiate it
/// into CDF and pdf; shared by fitting and maturity interpolation.
fn distribution_from_smile(
    smile: &IvSmile,
    grid_spec: &GridSpec,
    date: Option<NaiveDate>,
    horizon_days: i64,
) -> Result<DistributionEstimate, RndError> {
    let pchip = Pchip::fit(&smile.moneyness, &smile.vol);
    let (m_lo, m_hi) = (
        smile.moneyness[0],
        smile.moneyness[smile.moneyness.len() - 1],
    );
    let grid = crate::math::linspace(grid_spec.lo, grid_spec.hi, grid_spec.n_points);
    let h = (grid_spec.hi - grid_spec.lo) / (grid_spec.n_points - 1) as f64;

    // Flat-in-vol tail extrapolation: clamp the evaluation point.
    let vols: Vec<f64> = grid
        .iter()
        .map(|&m| pchip.eval(m.clamp(m_lo, m_hi)).max(1e-6))
        .collect();
    let puts: Vec<f64> = grid
        .iter()
        .zip(&vols)
        .map(|(&m, &v)| bs_put_unit(m, smile.forward_moneyness, v, smile.t_years, smile.rf))
        .collect();

    // CDF from the first derivative of the put curve (central differences,
    // one-sided at the ends), scaled by the gross rate.
    let n = grid.len();
    let mut cdf = vec![0.0; n];
    for i in 0..n {
        let slope = if i == 0 {
            (puts[1] - puts[0]) / h
        } else if i == n - 1 {
            (puts[n - 1] - puts[n - 2]) / h
        } else {
            (puts[i + 1] - puts[i - 1]) / (2.0 * h)
        };
        cdf[i] = (smile.rf * slope).clamp(0.0, 1.0);
    }
    let cdf = isotonic_nondecreasing(&cdf);

    // Density as the derivative of the isotonized CDF — equivalent to the
    // second difference of the put curve up to the monotonicity repair, and
    // nonnegative by construction.
    let mut pdf = vec![0.0; n];
    for i in 0..n {
        pdf[i] = if i == 0 {
            (cdf[1] - cdf[0]) / h
        } else if i == n - 1 {
            (cdf[n - 1] - cdf[n - 2]) / h
        } else {
            (cdf[i + 1] - cdf[i - 1]) / (2.0 * h)
        };
    }

    DistributionEstimate::new(
        grid,
        cdf,
        pdf,
        MeasureTag::RiskNeutral,
        date,
        horizon_days,
        Some(smile.clone()),
    )
}

/// Fit the risk-neutral distribution of the gross return K/S from one
/// cleaned option chain.
pub fn fit_rn_distribution(
    chain: &OptionChain,
    grid_spec: &GridSpec,
) -> Result<DistributionEstimate, RndError> {
    let spot = chain.underlying;
    let rf = chain.risk_free_gross;
    let fwd_m = chain.forward.map_or(rf, |f| f / spot);
    let t_years = chain.maturity_days as f64 / 365.0;

    let strikes: Vec<f64> = chain.quotes.iter().map(|q| q.strike / spot).collect();
    let (lo, hi) = (
        strikes.iter().copied().fold(f64::INFINITY, f64::min),
        strikes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    if chain.quotes.len() < 8 || lo > 0.7 || hi < 1.1 {
        return Err(RndError::TooFewStrikes {
            found: chain.quotes.len(),
            need: 8,
            lo,
            hi,
        });
    }

    let mut moneyness = Vec::new();
    let mut vols = Vec::new();
    let mut dropped = 0usize;
    for q in &chain.quotes {
        let m = q.strike / spot;
        match implied_vol(q.midprice / spot, m, fwd_m, t_years, rf, q.flag) {
            Some(v) => {
                moneyness.push(m);
                vols.push(v);
            }
            None => dropped += 1,
        }
    }
    let total = chain.quotes.len();
    if dropped * 5 > total {
        return Err(RndError::NonconvergentImpliedVol { dropped, total });
    }

    let smile = IvSmile {
        moneyness,
        vol: vols,
        t_years,
        rf,
        forward_moneyness: fwd_m,
    };
    distribution_from_smile(&smile, grid_spec, Some(chain.observation_date), chain.maturity_days)
}

/// Interpolate two same-date fits to a target maturity, linearly in total
/// implied variance at matched moneyness, then refit the distribution.
pub fn interpolate_maturity(
    chain_a: &DistributionEstimate,
    chain_b: &DistributionEstimate,
    target_days: i64,
) -> Result<DistributionEstimate, RndError> {
    if chain_a.date != chain_b.date {
        return Err(RndError::InvalidDistribution(
            "maturity interpolation requires same-date fits".into(),
        ));
    }
    if target_days == chain_a.horizon_days {
        return Ok(chain_a.clone());
    }
    if target_days == chain_b.horizon_days {
        return Ok(chain_b.clone());
    }
    let (lo, hi) = (chain_a.horizon_days, chain_b.horizon_days);
    if !(lo < target_days && target_days < hi) {
        return Err(RndError::BracketingError {
            target: target_days,
            lo,
            hi,
        });
    }
    let (sa, sb) = match (&chain_a.iv_smile, &chain_b.iv_smile) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(RndError::InvalidDistribution(
                "maturity interpolation requires fitted implied-vol smiles".into(),
            ))
        }
    };

    let t_t = target_days as f64 / 365.0;
    let weight = (t_t - sa.t_years) / (sb.t_years - sa.t_years);

    // Evaluate both smiles (flat tails) on a common moneyness set and
    // interpolate total variance pointwise.
    let pa = Pchip::fit(&sa.moneyness, &sa.vol);
    let pb = Pchip::fit(&sb.moneyness, &sb.vol);
    let (alo, ahi) = (sa.moneyness[0], sa.moneyness[sa.moneyness.len() - 1]);
    let (blo, bhi) = (sb.moneyness[0], sb.moneyness[sb.moneyness.len() - 1]);
    let m_grid = crate::math::linspace(alo.min(blo), ahi.max(bhi), 201);
    let vol_t: Vec<f64> = m_grid
        .iter()
        .map(|&m| {
            let va = pa.eval(m.clamp(alo, ahi)).max(1e-6);
            let vb = pb.eval(m.clamp(blo, bhi)).max(1e-6);
            let w_a = va * va * sa.t_years;
            let w_b = vb * vb * sb.t_years;
            let w_t = w_a + (w_b - w_a) * weight;
            (w_t / t_t).max(1e-12).sqrt()
        })
        .collect();

    // Rates interpolate linearly in log over maturity (constant continuous
    // compounding within the bracket).
    let ln_rf = sa.rf.ln() + (sb.rf.ln() - sa.rf.ln()) * weight;
    let ln_fm =
        sa.forward_moneyness.ln() + (sb.forward_moneyness.ln() - sa.forward_moneyness.ln()) * weight;

    let smile = IvSmile {
        moneyness: m_grid,
        vol: vol_t,
        t_years: t_t,
        rf: ln_rf.exp(),
        forward_moneyness: ln_fm.exp(),
    };
    distribution_from_smile(&smile, &GridSpec::default(), chain_a.date, target_days)
}

// ---------- quantiles, aggregation, moments ----------

/// Risk-neutral (or physical) quantile curve on a τ-grid via the generalized
/// inverse of the fitted CDF.
pub fn rn_quantile_curve(dist: &DistributionEstimate, taus: &[f64]) -> QuantileCurve {
    let values: Vec<f64> = taus
        .iter()
        .map(|&t| {
            if t < dist.cdf[0] {
                log::warn!(
                    "quantile level {t} below the grid coverage {:.2e}; truncating to grid start",
                    dist.cdf[0]
                );
            }
            dist.quantile(t)
        })
        .collect();
    QuantileCurve {
        taus: taus.to_vec(),
        values,
        semantics_tag: match dist.measure_tag {
            MeasureTag::RiskNeutral => SemanticsTag::RnQuantile,
            MeasureTag::Physical => SemanticsTag::PhysicalQuantile,
        },
    }
}

/// Pointwise average of conditional CDFs on the union grid.
pub fn unconditional_rn_cdf(
    dists: &[DistributionEstimate],
) -> Result<DistributionEstimate, RndError> {
    let refs: Vec<&DistributionEstimate> = dists.iter().collect();
    unconditional_rn_cdf_refs(&refs)
}

/// As [`unconditional_rn_cdf`] but over borrowed estimates, so resampling
/// loops can re-average thousands of fitted dates without cloning them.
pub fn unconditional_rn_cdf_refs(
    dists: &[&DistributionEstimate],
) -> Result<DistributionEstimate, RndError> {
    let first = *dists
        .first()
        .ok_or_else(|| RndError::InvalidDistribution("empty distribution list".into()))?;
    for d in dists {
        if d.horizon_days != first.horizon_days {
            return Err(RndError::MixedHorizon(first.horizon_days, d.horizon_days));
        }
    }
    if dists.len() == 1 {
        return Ok(first.clone());
    }
    let shared = dists.iter().all(|d| d.grid == first.grid);
    let mut grid: Vec<f64> = Vec::new();
    if shared {
        grid.extend_from_slice(&first.grid);
    } else {
        grid.extend(dists.iter().flat_map(|d| d.grid.iter().copied()));
        grid.sort_by(|a, b| a.total_cmp(b));
        grid.dedup();
    }
    let inv = 1.0 / dists.len() as f64;
    let (cdf, pdf): (Vec<f64>, Vec<f64>) = if shared {
        // Identical grids: average the stored vectors directly.
        let mut cdf = vec![0.0; grid.len()];
        let mut pdf = vec![0.0; grid.len()];
        for d in dists {
            for (acc, v) in cdf.iter_mut().zip(&d.cdf) {
                *acc += v * inv;
            }
            for (acc, v) in pdf.iter_mut().zip(&d.pdf) {
                *acc += v * inv;
            }
        }
        (cdf, pdf)
    } else {
        (
            grid.iter()
                .map(|&x| dists.iter().map(|d| d.cdf_at(x)).sum::<f64>() * inv)
                .collect(),
            grid.iter()
                .map(|&x| dists.iter().map(|d| d.pdf_at(x)).sum::<f64>() * inv)
                .collect(),
        )
    };
    DistributionEstimate::new(
        grid,
        cdf,
        pdf,
        first.measure_tag,
        None,
        first.horizon_days,
        None,
    )
}

/// Internal τ-grid for quantile-based moment integrals: the canonical
/// 999-point grid refined log-spaced down to 1e-6 at both ends, so tail mass
/// is not lost to truncation.
fn moment_tau_grid() -> Vec<f64> {
    let mut taus = Vec::with_capacity(1121);
    for i in 0..=60 {
        taus.push(10f64.powf(-6.0 + 3.0 * i as f64 / 60.0));
    }
    for i in 2..=998 {
        taus.push(i as f64 / 1000.0);
    }
    for i in (0..=60).rev() {
        taus.push(1.0 - 10f64.powf(-6.0 + 3.0 * i as f64 / 60.0));
    }
    taus.sort_by(|a, b| a.total_cmp(b));
    taus.dedup();
    taus
}

/// Truncated risk-neutral moment ∫₀^{τ} [Q̃(p) − R_f]ⁿ dp from the quantile
/// function, by composite trapezoid on a tail-refined τ-grid.
pub fn rn_truncated_moment(dist: &DistributionEstimate, n: u32, rf: f64, tau_cap: f64) -> f64 {
    assert!((1..=4).contains(&n), "moment order {n} outside 1..=4");
    assert!(
        tau_cap > 0.0 && tau_cap <= 1.0,
        "tau_cap {tau_cap} outside (0,1]"
    );
    let base = moment_tau_grid();
    let mut taus: Vec<f64> = base.iter().copied().filter(|&t| t < tau_cap).collect();
    taus.push(tau_cap.min(1.0 - 1e-9));
    let integrand: Vec<f64> = taus
        .iter()
        .map(|&t| (dist.quantile(t) - rf).powi(n as i32))
        .collect();
    // Rectangle strips close the [0, τ_min] gap (and [τ_last, 1] when
    // tau_cap = 1), treating the clamped quantile as constant there.
    let mut total = trapezoid(&taus, &integrand);
    total += taus[0] * integrand[0];
    if tau_cap >= 1.0 {
        total += (1.0 - taus[taus.len() - 1]) * integrand[integrand.len() - 1];
    }
    total
}

/// Untruncated risk-neutral moment ∫₀¹ [Q̃(τ) − R_f]ⁿ dτ.
pub fn rn_moment(dist: &DistributionEstimate, n: u32, rf: f64) -> f64 {
    rn_truncated_moment(dist, n, rf, 1.0)
}
