//! Quantile regression: pinball-loss fitting, fit statistics, joint Wald
//! tests, hit rates, and out-of-sample quantile forecasting.

mod interior;
mod vertex;

use crate::market_data::ReturnSeries;
use crate::math::{linalg, sample_quantile};
use chrono::NaiveDate;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;
use thiserror::Error;

pub use interior::pinball_loss;

#[derive(Debug, Error)]
pub enum QRError {
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("regressor matrix is rank deficient")]
    DegenerateDesign,
    #[error("solver did not converge within the iteration cap")]
    NonConvergence,
    #[error("date alignment failed: {0}")]
    AlignmentError(String),
    #[error("window of {window} observations does not fit a sample of {n}")]
    WindowTooLong { window: usize, n: usize },
    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,
}

/// One quantile-regression problem: responses, regressor columns (the
/// intercept is added internally when requested), and the quantile level.
#[derive(Debug, Clone)]
pub struct QRDesign {
    pub responses: Vec<f64>,
    /// Row-major regressor matrix, one row per observation, without the
    /// intercept column.
    pub regressors: Vec<Vec<f64>>,
    pub tau: f64,
    pub include_intercept: bool,
}

impl QRDesign {
    pub fn new(
        responses: Vec<f64>,
        regressors: Vec<Vec<f64>>,
        tau: f64,
        include_intercept: bool,
    ) -> Result<Self, QRError> {
        let n = responses.len();
        if regressors.len() != n {
            return Err(QRError::InvalidDesign(format!(
                "{} responses vs {} regressor rows",
                n,
                regressors.len()
            )));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(QRError::InvalidDesign(format!("tau {tau} outside (0,1)")));
        }
        let k = regressors.first().map_or(0, |r| r.len());
        if regressors.iter().any(|r| r.len() != k) {
            return Err(QRError::InvalidDesign("ragged regressor rows".into()));
        }
        let p = k + usize::from(include_intercept);
        if p == 0 {
            return Err(QRError::InvalidDesign("no regressors and no intercept".into()));
        }
        if n < p + 1 {
            return Err(QRError::InvalidDesign(format!(
                "{n} rows cannot identify {p} parameters (need at least {})",
                p + 1
            )));
        }
        if responses.iter().any(|v| !v.is_finite())
            || regressors.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(QRError::InvalidDesign("non-finite entries".into()));
        }
        Ok(QRDesign {
            responses,
            regressors,
            tau,
            include_intercept,
        })
    }

    /// Convenience: single-regressor design with intercept.
    pub fn univariate(responses: Vec<f64>, regressor: Vec<f64>, tau: f64) -> Result<Self, QRError> {
        let rows = regressor.into_iter().map(|v| vec![v]).collect();
        QRDesign::new(responses, rows, tau, true)
    }

    pub fn intercept_only(responses: Vec<f64>, tau: f64) -> Result<Self, QRError> {
        let n = responses.len();
        QRDesign::new(responses, vec![vec![]; n], tau, true)
    }

    /// Number of fitted parameters (including the intercept).
    pub fn n_params(&self) -> usize {
        self.regressors.first().map_or(0, |r| r.len()) + usize::from(self.include_intercept)
    }

    /// Full design matrix with the intercept column prepended when requested.
    pub fn design_matrix(&self) -> Vec<Vec<f64>> {
        self.regressors
            .iter()
            .map(|r| {
                if self.include_intercept {
                    let mut row = Vec::with_capacity(r.len() + 1);
                    row.push(1.0);
                    row.extend_from_slice(r);
                    row
                } else {
                    r.clone()
                }
            })
            .collect()
    }
}

/// A fitted quantile regression at one τ.
#[derive(Debug, Clone)]
pub struct QRFit {
    /// Coefficients, intercept first when present.
    pub beta: Vec<f64>,
    /// Minimized pinball objective.
    pub loss: f64,
    /// Goodness of fit relative to the intercept-only benchmark
    /// (whose optimum is the in-sample τ-quantile).
    pub r1: f64,
    /// Bootstrap covariance of beta, when estimated.
    pub cov_boot: Option<Vec<Vec<f64>>>,
    /// p-value of the canonical joint restriction, when tested.
    pub wald_p: Option<f64>,
    pub n_obs: usize,
}

/// Fit one quantile regression by the interior-point solver with exact
/// vertex crossover; for n ≤ 30 a failed solve falls back to exhaustive
/// vertex enumeration.
pub fn qr_fit(design: &QRDesign) -> Result<QRFit, QRError> {
    let x = design.design_matrix();
    let y = &design.responses;
    let n = y.len();
    let p = design.n_params();
    if linalg::mat_rank(&x) < p {
        return Err(QRError::DegenerateDesign);
    }

    let beta = {
        let solved = interior::solve_pinball(&x, y, design.tau);
        match solved {
            Ok(b) => Ok(b),
            Err(QRError::NonConvergence) if n <= 30 => vertex::solve_by_enumeration(&x, y, design.tau),
            Err(e) => Err(e),
        }
    }?;

    let resid: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| yi - row.iter().zip(&beta).map(|(u, v)| u * v).sum::<f64>())
        .collect();
    let loss = pinball_loss(&resid, design.tau);

    // Intercept-only benchmark: the in-sample τ-quantile minimizes the
    // pinball loss over constants.
    let q0 = sample_quantile(y, design.tau);
    let bench: f64 = y
        .iter()
        .map(|&v| {
            let r = v - q0;
            if r < 0.0 {
                r * (design.tau - 1.0)
            } else {
                r * design.tau
            }
        })
        .sum();
    let r1 = if bench <= f64::MIN_POSITIVE {
        if loss <= f64::MIN_POSITIVE {
            1.0
        } else {
            f64::MIN
        }
    } else {
        1.0 - loss / bench
    };

    Ok(QRFit {
        beta,
        loss,
        r1,
        cov_boot: None,
        wald_p: None,
        n_obs: n,
    })
}

/// Mean hit-rate deviation, in percent: average of 1{R_t < q_t} − τ over the
/// dates shared by the return series and the per-date quantile values.
pub fn hit_statistic(
    returns: &ReturnSeries,
    rn_quantiles: &[(NaiveDate, f64)],
    tau: f64,
) -> Result<f64, QRError> {
    let by_date: BTreeMap<NaiveDate, f64> = rn_quantiles.iter().copied().collect();
    let mut hits = Vec::new();
    for (t, &r) in returns.dates.iter().zip(&returns.values) {
        if let Some(&q) = by_date.get(t) {
            hits.push(f64::from(u8::from(r < q)) - tau);
        }
    }
    if hits.is_empty() {
        return Err(QRError::AlignmentError(
            "no overlapping dates between returns and quantiles".into(),
        ));
    }
    Ok(100.0 * hits.iter().sum::<f64>() / hits.len() as f64)
}

/// Out-of-sample R¹ against the rolling historical-quantile benchmark:
/// 1 − Σρ_τ(R_t − forecast_t) / Σρ_τ(R_t − rollq_t), summing from
/// t = window, where rollq_t is the τ-quantile of the previous `window`
/// returns. The forecast must not use in-sample estimation.
pub fn r1_oos(
    returns: &ReturnSeries,
    forecast: &[(NaiveDate, f64)],
    window: usize,
    tau: f64,
) -> Result<f64, QRError> {
    let n = returns.len();
    if window < 20 {
        return Err(QRError::InvalidDesign(format!(
            "rolling window {window} shorter than 20"
        )));
    }
    if window >= n {
        return Err(QRError::WindowTooLong { window, n });
    }
    let by_date: BTreeMap<NaiveDate, f64> = forecast.iter().copied().collect();
    let rho = |r: f64| if r < 0.0 { r * (tau - 1.0) } else { r * tau };
    let mut num = 0.0;
    let mut den = 0.0;
    for t in window..n {
        let date = returns.dates[t];
        let Some(&f) = by_date.get(&date) else {
            return Err(QRError::AlignmentError(format!("no forecast for {date}")));
        };
        let bench = sample_quantile(&returns.values[t - window..t], tau);
        num += rho(returns.values[t] - f);
        den += rho(returns.values[t] - bench);
    }
    if den <= f64::MIN_POSITIVE {
        return Ok(if num <= f64::MIN_POSITIVE { 0.0 } else { f64::MIN });
    }
    Ok(1.0 - num / den)
}

/// Wald test of the joint restriction A β = b against the bootstrap
/// covariance; the statistic is referred to a chi-square with rank(A)
/// degrees of freedom.
pub fn wald_test(fit: &QRFit, a: &[Vec<f64>], b: &[f64]) -> Result<f64, QRError> {
    let cov = fit
        .cov_boot
        .as_ref()
        .ok_or_else(|| QRError::InvalidDesign("bootstrap covariance required".into()))?;
    let p = fit.beta.len();
    let q = a.len();
    if q == 0 || q > p || b.len() != q || a.iter().any(|row| row.len() != p) {
        return Err(QRError::InvalidDesign(format!(
            "restriction shape {}×{} incompatible with {p} coefficients",
            q,
            a.first().map_or(0, |r| r.len()),
        )));
    }
    // Discrepancy Aβ − b.
    let diff: Vec<f64> = (0..q)
        .map(|i| {
            a[i].iter()
                .zip(&fit.beta)
                .map(|(u, v)| u * v)
                .sum::<f64>()
                - b[i]
        })
        .collect();
    // A Σ Aᵀ.
    let mut asat = vec![vec![0.0; q]; q];
    for i in 0..q {
        for j in 0..q {
            let mut s = 0.0;
            for r in 0..p {
                for c in 0..p {
                    s += a[i][r] * cov[r][c] * a[j][c];
                }
            }
            asat[i][j] = s;
        }
    }
    let sol = linalg::cholesky_solve(&asat, &diff).ok_or(QRError::SingularCovariance)?;
    let stat: f64 = diff.iter().zip(&sol).map(|(u, v)| u * v).sum::<f64>().max(0.0);
    let chi2 = ChiSquared::new(q as f64).map_err(|_| QRError::SingularCovariance)?;
    Ok(1.0 - chi2.cdf(stat))
}

/// Expanding-window quantile forecasts: for each t ≥ initial_window, fit the
/// univariate quantile regression on data before t and emit
/// β̂₀ + β̂₁·rn_quantiles[t]. Coefficients are re-estimated every
/// `refit_every` steps (1 = every step). Output index 0 corresponds to
/// observation `initial_window`.
pub fn expanding_forecast(
    responses: &[f64],
    rn_quantiles: &[f64],
    initial_window: usize,
    tau: f64,
    refit_every: usize,
) -> Result<Vec<f64>, QRError> {
    let n = responses.len();
    if rn_quantiles.len() != n {
        return Err(QRError::InvalidDesign(format!(
            "{} responses vs {} quantile values",
            n,
            rn_quantiles.len()
        )));
    }
    if initial_window < 100 {
        return Err(QRError::InvalidDesign(format!(
            "initial window {initial_window} shorter than 100"
        )));
    }
    if initial_window >= n {
        return Err(QRError::WindowTooLong {
            window: initial_window,
            n,
        });
    }
    let cadence = refit_every.max(1);
    let mut beta: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(n - initial_window);
    for t in initial_window..n {
        if beta.is_none() || (t - initial_window) % cadence == 0 {
            let design = QRDesign::univariate(
                responses[..t].to_vec(),
                rn_quantiles[..t].to_vec(),
                tau,
            )?;
            beta = Some(qr_fit(&design)?.beta);
        }
        let b = beta.as_ref().unwrap();
        out.push(b[0] + b[1] * rn_quantiles[t]);
    }
    Ok(out)
}

/// Fraction of adjacent-τ pairs, across all dates, whose fitted quantiles
/// cross (a higher τ producing a strictly smaller value). `values_per_tau`
/// holds one per-date value vector per τ level, ordered by increasing τ.
pub fn crossing_rate(values_per_tau: &[Vec<f64>]) -> f64 {
    let mut total = 0usize;
    let mut crossed = 0usize;
    for pair in values_per_tau.windows(2) {
        for (lo, hi) in pair[0].iter().zip(&pair[1]) {
            total += 1;
            if hi < lo {
                crossed += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        crossed as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line_recovers_coefficients() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 2.0 + 3.0 * x).collect();
        for &tau in &[0.1, 0.5, 0.9] {
            let fit = qr_fit(&QRDesign::univariate(ys.clone(), xs.clone(), tau).unwrap()).unwrap();
            assert_abs_diff_eq!(fit.beta[0], 2.0, epsilon = 1e-8);
            assert_abs_diff_eq!(fit.beta[1], 3.0, epsilon = 1e-8);
            assert!(fit.loss < 1e-9);
            assert_abs_diff_eq!(fit.r1, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn intercept_only_median_is_sample_median() {
        let ys = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let fit = qr_fit(&QRDesign::intercept_only(ys, 0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(fit.beta[0], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn rank_deficient_design_errors() {
        let ys = vec![1.0, 2.0, 3.0, 4.0];
        let rows = vec![vec![1.0, 2.0]; 4];
        let design = QRDesign::new(ys, rows, 0.5, true).unwrap();
        assert!(matches!(qr_fit(&design), Err(QRError::DegenerateDesign)));
    }

    #[test]
    fn subgradient_counts_hold_at_optimum() {
        // Intercept-only: #\{r < 0\} ≤ nτ ≤ #\{r ≤ 0\}.
        let ys: Vec<f64> = (0..57).map(|i| ((i * 37) % 100) as f64 / 10.0).collect();
        for &tau in &[0.1, 0.25, 0.5, 0.9] {
            let fit = qr_fit(&QRDesign::intercept_only(ys.clone(), tau).unwrap()).unwrap();
            let neg = ys.iter().filter(|&&v| v < fit.beta[0]).count() as f64;
            let nonpos = ys.iter().filter(|&&v| v <= fit.beta[0]).count() as f64;
            let n = ys.len() as f64;
            assert!(neg <= n * tau + 1e-9, "tau={tau}: {neg} > nτ");
            assert!(nonpos >= n * tau - 1e-9, "tau={tau}: {nonpos} < nτ");
        }
    }

    #[test]
    fn wald_p_is_one_when_restriction_holds() {
        let fit = QRFit {
            beta: vec![0.0, 1.0],
            loss: 1.0,
            r1: 0.5,
            cov_boot: Some(vec![vec![0.04, 0.001], vec![0.001, 0.02]]),
            wald_p: None,
            n_obs: 100,
        };
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = wald_test(&fit, &a, &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn wald_p_tiny_for_extreme_statistic() {
        let fit = QRFit {
            beta: vec![5.0, 9.0],
            loss: 1.0,
            r1: 0.5,
            cov_boot: Some(vec![vec![1e-4, 0.0], vec![0.0, 1e-4]]),
            wald_p: None,
            n_obs: 100,
        };
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = wald_test(&fit, &a, &[0.0, 1.0]).unwrap();
        assert!(p < 1e-6);
    }

    #[test]
    fn crossing_rate_counts_violations() {
        let q10 = vec![1.0, 1.0, 1.0, 1.0];
        let q50 = vec![2.0, 0.5, 2.0, 2.0];
        assert_abs_diff_eq!(crossing_rate(&[q10, q50]), 0.25, epsilon = 1e-15);
    }
}
