//! Simulation data-generating processes for the study harnesses.
//!
//! Each DGP emits realized gross returns under the physical law together
//! with the exact per-period risk-neutral distribution, which is known in
//! closed form — mirroring the real-world situation in which option prices
//! reveal the conditional risk-neutral law one period ahead.  On request the
//! lognormal kinds also emit synthetic option chains at two maturities
//! bracketing the target horizon, so the estimation pipeline can be run on
//! data whose ground truth is known (the measurement-error design).
//!
//! Replicate-level parallelism belongs to the caller: one `simulate_dgp`
//! call is a single replicate driven by its own seeded generator, so
//! replicates with distinct seeds can run on worker threads independently.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::{DisasterParams, ModelError, ParetoParams};
use crate::market_data::{ChainQuote, OptionChain, OptionFlag, ReturnSeries};
use crate::math::{norm_cdf, norm_pdf, norm_ppf};
use crate::rnd::{bs_call_unit, bs_put_unit, DistributionEstimate, MeasureTag};

/// Calendar-day convention used to annualize horizons.
pub const DAYS_PER_YEAR: f64 = 365.0;

/// Which process generates returns and risk-neutral laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    /// Lognormal returns with (μ_t, r_t, σ_t) redrawn i.i.d. every period,
    /// so history is useless for quantile forecasting but option prices are
    /// fully revealing.
    BsTimevarying,
    /// Lognormal returns with the same parameters every period.
    BsFixed,
    /// Consumption-disaster model with constant parameters; one period is
    /// one year of the calibration.
    Disaster,
    /// Power-law SDF/return model with constant parameters.
    Pareto,
}

/// One period's annualized lognormal parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PeriodParams {
    /// Physical drift of log price per year.
    pub mu: f64,
    /// Continuously compounded risk-free rate per year.
    pub r: f64,
    /// Volatility per square-root year.
    pub sigma: f64,
}

impl PeriodParams {
    fn log_sd(&self, t_years: f64) -> f64 {
        self.sigma * t_years.sqrt()
    }

    fn rn_log_mean(&self, t_years: f64) -> f64 {
        (self.r - 0.5 * self.sigma * self.sigma) * t_years
    }

    fn physical_log_mean(&self, t_years: f64) -> f64 {
        (self.mu - 0.5 * self.sigma * self.sigma) * t_years
    }

    /// Gross risk-free rate over the horizon.
    pub fn rf_gross(&self, t_years: f64) -> f64 {
        (self.r * t_years).exp()
    }

    /// Physical τ-quantile of the gross return over `t_years`.
    pub fn physical_quantile(&self, t_years: f64, tau: f64) -> f64 {
        (self.physical_log_mean(t_years) + self.log_sd(t_years) * norm_ppf(tau)).exp()
    }

    /// Risk-neutral τ-quantile of the gross return over `t_years`.
    pub fn rn_quantile(&self, t_years: f64, tau: f64) -> f64 {
        (self.rn_log_mean(t_years) + self.log_sd(t_years) * norm_ppf(tau)).exp()
    }

    pub fn physical_cdf(&self, t_years: f64, x: f64) -> f64 {
        norm_cdf((x.ln() - self.physical_log_mean(t_years)) / self.log_sd(t_years))
    }

    pub fn rn_cdf(&self, t_years: f64, x: f64) -> f64 {
        norm_cdf((x.ln() - self.rn_log_mean(t_years)) / self.log_sd(t_years))
    }

    /// Risk-neutral density at `x`.
    pub fn rn_pdf(&self, t_years: f64, x: f64) -> f64 {
        let s = self.log_sd(t_years);
        let z = (x.ln() - self.rn_log_mean(t_years)) / s;
        norm_pdf(z) / (x * s)
    }

    /// Tabulated risk-neutral law on a ±6-log-sd grid.
    pub fn rn_distribution(
        &self,
        horizon_days: i64,
        n_points: usize,
        date: Option<NaiveDate>,
    ) -> DistributionEstimate {
        let t = horizon_days as f64 / DAYS_PER_YEAR;
        let (a, s) = (self.rn_log_mean(t), self.log_sd(t));
        let grid = crate::math::linspace((a - 6.0 * s).exp(), (a + 6.0 * s).exp(), n_points);
        let cdf = grid.iter().map(|&x| self.rn_cdf(t, x)).collect();
        let pdf = grid.iter().map(|&x| self.rn_pdf(t, x)).collect();
        DistributionEstimate::new(
            grid,
            cdf,
            pdf,
            MeasureTag::RiskNeutral,
            date,
            horizon_days,
            None,
        )
        .expect("closed-form lognormal law on a ±6-sd grid is well formed")
    }
}

/// Configuration shared by every [`DgpKind`]; unused parts are ignored by
/// kinds that do not need them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpConfig {
    /// Return horizon in calendar days (lognormal kinds).
    pub horizon_days: i64,
    /// Per-period volatility draw range for `BsTimevarying`.
    pub sigma_range: (f64, f64),
    /// Per-period drift draw range for `BsTimevarying`.
    pub mu_range: (f64, f64),
    /// Per-period risk-free draw range for `BsTimevarying`.
    pub r_range: (f64, f64),
    /// Parameters used by `BsFixed`.
    pub fixed: PeriodParams,
    /// Parameters used by `Disaster`.
    pub disaster: DisasterParams,
    /// Parameters used by `Pareto`.
    pub pareto: ParetoParams,
    /// Tabulate one `DistributionEstimate` per date.
    pub with_dists: bool,
    /// Emit one synthetic chain pair per date (lognormal kinds only).
    pub with_chains: bool,
    /// The two chain maturities in days, bracketing the target horizon.
    pub chain_maturity_days: (i64, i64),
    /// Strikes per synthetic chain, on a uniform moneyness ladder.
    pub n_strikes: usize,
    /// Grid points per tabulated distribution.
    pub dist_points: usize,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            horizon_days: 30,
            sigma_range: (0.05, 0.35),
            mu_range: (-0.02, 0.2),
            r_range: (0.0, 0.03),
            fixed: PeriodParams {
                mu: 0.08,
                r: 0.02,
                sigma: 0.2,
            },
            disaster: DisasterParams::default(),
            pareto: ParetoParams::calibrated(0.08, 0.0, 0.33)
                .expect("shipped Pareto calibration is valid"),
            with_dists: false,
            with_chains: false,
            chain_maturity_days: (85, 97),
            n_strikes: 41,
            dist_points: 1501,
        }
    }
}

impl DgpConfig {
    fn validate(&self, kind: DgpKind) -> Result<(), ModelError> {
        if self.horizon_days < 1 {
            return Err(ModelError::InvalidParams(format!(
                "horizon must be at least one day, got {}",
                self.horizon_days
            )));
        }
        match kind {
            DgpKind::BsTimevarying => {
                for (name, (lo, hi)) in [
                    ("sigma", self.sigma_range),
                    ("mu", self.mu_range),
                    ("r", self.r_range),
                ] {
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                        return Err(ModelError::InvalidParams(format!(
                            "{name} draw range ({lo}, {hi}) is not an interval"
                        )));
                    }
                }
                if self.sigma_range.0 <= 0.0 {
                    return Err(ModelError::InvalidParams(
                        "volatility draw range must be strictly positive".into(),
                    ));
                }
            }
            DgpKind::BsFixed => {
                if !(self.fixed.sigma > 0.0) || !self.fixed.mu.is_finite() {
                    return Err(ModelError::InvalidParams(
                        "fixed lognormal parameters need finite drift and positive volatility"
                            .into(),
                    ));
                }
            }
            DgpKind::Disaster => self.disaster.validate()?,
            DgpKind::Pareto => self.pareto.validate()?,
        }
        if self.with_chains {
            if self.n_strikes < 8 {
                return Err(ModelError::InvalidParams(format!(
                    "synthetic chains need at least 8 strikes, got {}",
                    self.n_strikes
                )));
            }
            let (lo, hi) = self.chain_maturity_days;
            if !(0 < lo && lo < hi) {
                return Err(ModelError::InvalidParams(format!(
                    "chain maturities must satisfy 0 < {lo} < {hi}"
                )));
            }
        }
        if self.with_dists && self.dist_points < 101 {
            return Err(ModelError::InvalidParams(format!(
                "tabulated distributions need at least 101 grid points, got {}",
                self.dist_points
            )));
        }
        Ok(())
    }
}

/// One replicate of simulated data.
#[derive(Debug, Clone)]
pub struct DgpOutput {
    /// `values[i]` is the gross return realized over the horizon that starts
    /// at `dates[i]`; everything else in this struct indexed by `i` is known
    /// at that same start date.
    pub returns: ReturnSeries,
    /// Exact conditional risk-neutral law per date (empty unless
    /// `with_dists`).
    pub per_date_rn: Vec<DistributionEstimate>,
    /// Per-period lognormal parameters (empty for disaster/Pareto kinds).
    pub period_params: Vec<PeriodParams>,
    /// Gross risk-free rate over the horizon, per date.
    pub rf_gross: Vec<f64>,
    /// Synthetic chain pair per date at the two configured maturities
    /// (empty unless `with_chains`).
    pub chains: Vec<[OptionChain; 2]>,
}

/// Mid-month observation dates starting January 1990.
fn monthly_date(i: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(1990 + (i / 12) as i32, 1 + (i % 12) as u32, 15)
        .expect("mid-month dates are always valid")
}

/// Price an exact Black–Scholes chain with spot 1, so strikes are moneyness.
/// Out-of-the-money side only: puts below the forward, calls above.
fn bs_chain(pp: &PeriodParams, date: NaiveDate, maturity_days: i64, n_strikes: usize) -> OptionChain {
    let t = maturity_days as f64 / DAYS_PER_YEAR;
    let rf = pp.rf_gross(t);
    let fwd = rf;
    let quotes = crate::math::linspace(0.55, 1.55, n_strikes)
        .into_iter()
        .map(|k| {
            let (flag, midprice) = if k <= fwd {
                (OptionFlag::Put, bs_put_unit(k, fwd, pp.sigma, t, rf))
            } else {
                (OptionFlag::Call, bs_call_unit(k, fwd, pp.sigma, t, rf))
            };
            ChainQuote {
                strike: k,
                midprice,
                flag,
                spread: 0.0,
            }
        })
        .collect();
    OptionChain {
        observation_date: date,
        maturity_days,
        quotes,
        underlying: 1.0,
        forward: Some(fwd),
        risk_free_gross: rf,
    }
}

/// Tabulate the Pareto risk-neutral law on a geometric grid from the support
/// floor to past the 1 − 2·10⁻⁴ quantile.
fn pareto_rn_dist(p: &ParetoParams, n_points: usize, horizon_days: i64) -> DistributionEstimate {
    let lo = p.b;
    let hi = p.rn_quantile(1.0 - 2e-4) * 1.02;
    let ratio = (hi / lo).powf(1.0 / (n_points - 1) as f64);
    let grid: Vec<f64> = (0..n_points).map(|i| lo * ratio.powi(i as i32)).collect();
    let cdf = grid
        .iter()
        .map(|&x| p.rn_cdf(x).expect("grid stays on the support"))
        .collect();
    let pdf = grid
        .iter()
        .map(|&x| p.rn_pdf(x).expect("grid stays on the support"))
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
    .expect("closed-form power-law tail on a geometric grid is well formed")
}

/// Generate one replicate: `n_periods` non-overlapping monthly-dated
/// observations of realized returns plus whatever per-date conditional
/// information the config requests.
pub fn simulate_dgp(
    kind: DgpKind,
    config: &DgpConfig,
    n_periods: usize,
    seed: u64,
) -> Result<DgpOutput, ModelError> {
    if n_periods == 0 {
        return Err(ModelError::InvalidParams(
            "need at least one simulated period".into(),
        ));
    }
    config.validate(kind)?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dates: Vec<NaiveDate> = (0..n_periods).map(monthly_date).collect();
    let mut values = Vec::with_capacity(n_periods);
    let mut per_date_rn = Vec::new();
    let mut period_params = Vec::new();
    let mut rf_gross = Vec::with_capacity(n_periods);
    let mut chains = Vec::new();

    // Constant-parameter kinds price one law and stamp it onto every date.
    let stamp_days = match kind {
        DgpKind::BsTimevarying | DgpKind::BsFixed => config.horizon_days,
        // One period is one year of these calibrations.
        DgpKind::Disaster | DgpKind::Pareto => 365,
    };
    let base_dist: Option<DistributionEstimate> = match kind {
        DgpKind::Disaster if config.with_dists => {
            Some(config.disaster.rn_distribution(config.dist_points, stamp_days))
        }
        DgpKind::Pareto if config.with_dists => {
            Some(pareto_rn_dist(&config.pareto, config.dist_points, stamp_days))
        }
        _ => None,
    };

    let t_years = config.horizon_days as f64 / DAYS_PER_YEAR;
    for &date in &dates {
        match kind {
            DgpKind::BsTimevarying | DgpKind::BsFixed => {
                let pp = if kind == DgpKind::BsTimevarying {
                    PeriodParams {
                        mu: rng.gen_range(config.mu_range.0..=config.mu_range.1),
                        r: rng.gen_range(config.r_range.0..=config.r_range.1),
                        sigma: rng.gen_range(config.sigma_range.0..=config.sigma_range.1),
                    }
                } else {
                    config.fixed
                };
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                values.push((pp.physical_log_mean(t_years) + pp.log_sd(t_years) * z).exp());
                rf_gross.push(pp.rf_gross(t_years));
                if config.with_dists {
                    per_date_rn.push(pp.rn_distribution(
                        config.horizon_days,
                        config.dist_points,
                        Some(date),
                    ));
                }
                if config.with_chains {
                    let (m_lo, m_hi) = config.chain_maturity_days;
                    chains.push([
                        bs_chain(&pp, date, m_lo, config.n_strikes),
                        bs_chain(&pp, date, m_hi, config.n_strikes),
                    ]);
                }
                period_params.push(pp);
            }
            DgpKind::Disaster => {
                values.push(config.disaster.sample_return(&mut rng));
                rf_gross.push(config.disaster.risk_free());
            }
            DgpKind::Pareto => {
                let u: f64 = rng.gen_range(0.0..1.0);
                // u → 1 sends the return to +∞; the open range excludes it.
                values.push(config.pareto.sample(1.0 - u).1);
                rf_gross.push(config.pareto.risk_free());
            }
        }
        if let Some(base) = &base_dist {
            let mut d = base.clone();
            d.date = Some(date);
            per_date_rn.push(d);
        }
    }

    let returns = ReturnSeries::new(dates, stamp_days, values, false)
        .expect("simulated returns are positive on increasing dates");
    Ok(DgpOutput {
        returns,
        per_date_rn,
        period_params,
        rf_gross,
        chains,
    })
}
