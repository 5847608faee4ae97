//! Integration tests for the quantile-regression engine.
//!
//! The solver is checked against an oracle written from scratch in this file:
//! every optimal basic solution interpolates p observations, so for small n
//! the exact optimum is the best objective over all C(n, p) interpolating
//! fits. The oracle deliberately re-implements the subset solve rather than
//! calling into the library.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rnq_core::market_data::ReturnSeries;
use rnq_core::qr::{
    expanding_forecast, hit_statistic, pinball_loss, qr_fit, r1_oos, QRDesign, QRError,
};

// ---------- oracle helpers (independent re-implementation) ----------

/// Solve a p×p system by unpivoted Cramer-style elimination with full
/// pivoting, returning None when singular. Written independently of the
/// library's linear algebra.
fn oracle_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let p = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    let mut col_of_var: Vec<usize> = (0..p).collect();
    for step in 0..p {
        // Full pivot search in the remaining submatrix.
        let mut best = (step, step, 0.0f64);
        for i in step..p {
            for j in step..p {
                if m[i][j].abs() > best.2 {
                    best = (i, j, m[i][j].abs());
                }
            }
        }
        if best.2 < 1e-11 {
            return None;
        }
        m.swap(step, best.0);
        for row in m.iter_mut() {
            row.swap(step, best.1);
        }
        col_of_var.swap(step, best.1);
        for i in step + 1..p {
            let f = m[i][step] / m[step][step];
            for j in step..=p {
                m[i][j] -= f * m[step][j];
            }
        }
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = m[i][p];
        for j in i + 1..p {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    // Undo column permutation.
    let mut out = vec![0.0; p];
    for (slot, &var) in col_of_var.iter().enumerate() {
        out[var] = x[slot];
    }
    Some(out)
}

fn oracle_objective(x: &[Vec<f64>], y: &[f64], beta: &[f64], tau: f64) -> f64 {
    let mut total = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let fit: f64 = row.iter().zip(beta).map(|(u, v)| u * v).sum();
        let r = yi - fit;
        total += if r < 0.0 { (tau - 1.0) * r } else { tau * r };
    }
    total
}

/// Exhaustive minimum of the pinball objective over all p-row interpolating
/// fits, via index recursion (no external combinatorics helper).
fn oracle_best_objective(x: &[Vec<f64>], y: &[f64], tau: f64) -> f64 {
    let n = x.len();
    let p = x[0].len();
    let mut subset = vec![0usize; p];
    let mut best = f64::INFINITY;
    fn recurse(
        start: usize,
        depth: usize,
        n: usize,
        p: usize,
        subset: &mut Vec<usize>,
        x: &[Vec<f64>],
        y: &[f64],
        tau: f64,
        best: &mut f64,
    ) {
        if depth == p {
            let a: Vec<Vec<f64>> = subset.iter().map(|&i| x[i].clone()).collect();
            let b: Vec<f64> = subset.iter().map(|&i| y[i]).collect();
            if let Some(beta) = oracle_solve(&a, &b) {
                let obj = oracle_objective(x, y, &beta, tau);
                if obj < *best {
                    *best = obj;
                }
            }
            return;
        }
        for i in start..n {
            subset[depth] = i;
            recurse(i + 1, depth + 1, n, p, subset, x, y, tau, best);
        }
    }
    recurse(0, 0, n, p, &mut subset, x, y, tau, &mut best);
    best
}

// ---------- solver vs oracle ----------

#[test]
fn solver_matches_enumeration_oracle_on_500_random_designs() {
    let mut rng = ChaCha12Rng::seed_from_u64(20240817);
    for case in 0..500 {
        let n = rng.gen_range(8..=30);
        let k = rng.gen_range(0..=2); // regressors beyond the intercept
        let tau = rng.gen_range(0.05..0.95);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|_| {
                let noise: f64 = rng.gen_range(-1.0..1.0);
                let signal: f64 = xs[0].iter().sum();
                0.3 * signal + noise + rng.gen_range(-0.5..0.5)
            })
            .collect();
        let design = QRDesign::new(y.clone(), xs.clone(), tau, true).unwrap();
        let fit = qr_fit(&design).unwrap();

        let full: Vec<Vec<f64>> = xs
            .iter()
            .map(|r| {
                let mut row = vec![1.0];
                row.extend_from_slice(r);
                row
            })
            .collect();
        let oracle = oracle_best_objective(&full, &y, tau);
        let tol = 1e-9 * (1.0 + oracle.abs());
        assert!(
            (fit.loss - oracle).abs() <= tol,
            "case {case}: solver loss {} vs oracle {} (n={n}, p={}, tau={tau})",
            fit.loss,
            oracle,
            k + 1
        );
    }
}

#[test]
fn equivariance_under_design_reparametrization() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for _ in 0..40 {
        let n = rng.gen_range(40..120);
        let tau = rng.gen_range(0.1..0.9);
        // Full design with explicit intercept column so A mixes all columns.
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![1.0, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| r[1] - 0.5 * r[2] + rng.gen_range(-1.0..1.0))
            .collect();
        // Well-conditioned random A: diagonally dominant.
        let mut a = vec![vec![0.0; 3]; 3];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j {
                    rng.gen_range(1.0..2.0)
                } else {
                    rng.gen_range(-0.3..0.3)
                };
            }
        }
        let xa: Vec<Vec<f64>> = x
            .iter()
            .map(|r| {
                (0..3)
                    .map(|j| (0..3).map(|i| r[i] * a[i][j]).sum())
                    .collect()
            })
            .collect();
        let fit_x = qr_fit(&QRDesign::new(y.clone(), x.clone(), tau, false).unwrap()).unwrap();
        let fit_xa = qr_fit(&QRDesign::new(y.clone(), xa.clone(), tau, false).unwrap()).unwrap();
        // Loss is invariant.
        assert!(
            (fit_x.loss - fit_xa.loss).abs() <= 1e-8 * (1.0 + fit_x.loss),
            "loss changed under reparametrization"
        );
        // β̂(y, XA) = A⁻¹ β̂(y, X): compare A·β̂(y, XA) to β̂(y, X).
        let mapped: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a[i][j] * fit_xa.beta[j]).sum())
            .collect();
        for i in 0..3 {
            assert!(
                (mapped[i] - fit_x.beta[i]).abs() <= 1e-8 * (1.0 + fit_x.beta[i].abs()),
                "coefficient {i}: {} vs {}",
                mapped[i],
                fit_x.beta[i]
            );
        }
    }
}

#[test]
fn rotation_makes_rn_and_physical_quantile_regressions_agree() {
    // Lognormal returns with time-varying volatility: the risk-neutral τ-quantile
    // is a fixed scalar multiple of the physical one, so both regressions give
    // identical fitted values by equivariance.
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let (mu, r, t_years): (f64, f64, f64) = (0.08, 0.02, 30.0 / 365.0);
    let tau = 0.1;
    let z = -1.2815515655446004; // 10% standard-normal quantile
    let n = 300;
    let mut returns = Vec::new();
    let mut q_phys = Vec::new();
    let mut q_rn = Vec::new();
    for _ in 0..n {
        let sigma: f64 = rng.gen_range(0.1..0.4);
        let eps: f64 = {
            // Box–Muller from two uniforms, independent of library normals.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let st = sigma * t_years.sqrt();
        returns.push(((mu - 0.5 * sigma * sigma) * t_years + st * eps).exp());
        q_phys.push(((mu - 0.5 * sigma * sigma) * t_years + st * z).exp());
        q_rn.push(((r - 0.5 * sigma * sigma) * t_years + st * z).exp());
    }
    let fit_p = qr_fit(&QRDesign::univariate(returns.clone(), q_phys.clone(), tau).unwrap()).unwrap();
    let fit_q = qr_fit(&QRDesign::univariate(returns.clone(), q_rn.clone(), tau).unwrap()).unwrap();
    for i in 0..n {
        let pred_p = fit_p.beta[0] + fit_p.beta[1] * q_phys[i];
        let pred_q = fit_q.beta[0] + fit_q.beta[1] * q_rn[i];
        assert!(
            (pred_p - pred_q).abs() <= 1e-7 * (1.0 + pred_p.abs()),
            "fitted quantiles diverge at {i}: {pred_p} vs {pred_q}"
        );
    }
}

// ---------- hit statistic ----------

fn date(i: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Duration::days(i)
}

fn series(values: Vec<f64>) -> ReturnSeries {
    let dates = (0..values.len() as i64).map(date).collect();
    ReturnSeries::new(dates, 30, values, true).unwrap()
}

#[test]
fn hit_statistic_when_returns_always_below_quantile() {
    let rs = series(vec![0.9; 40]);
    let quantiles: Vec<(NaiveDate, f64)> = (0..40).map(|i| (date(i), 1.5)).collect();
    let hit = hit_statistic(&rs, &quantiles, 0.95).unwrap();
    assert!((hit - 5.0).abs() < 1e-10, "Hit = {hit}%, want 5%");
}

#[test]
fn hit_statistic_centers_in_risk_neutral_world() {
    // Returns drawn from the same distribution whose τ-quantile is supplied:
    // Hit converges to zero at the binomial rate.
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let tau = 0.3;
    let n = 4000;
    let q_true = 1.0 + 0.05 * (2.0 * tau - 1.0); // uniform on [0.95, 1.05]
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.95..1.05)).collect();
    let rs = series(values);
    let quantiles: Vec<(NaiveDate, f64)> = (0..n as i64).map(|i| (date(i), q_true)).collect();
    let hit = hit_statistic(&rs, &quantiles, tau).unwrap() / 100.0;
    let se = (tau * (1.0 - tau) / n as f64).sqrt();
    assert!(hit.abs() <= 3.0 * se, "Hit {hit} beyond 3 binomial s.e. {se}");
}

#[test]
fn hit_statistic_requires_overlap() {
    let rs = series(vec![1.0; 10]);
    let far: Vec<(NaiveDate, f64)> = (500..510).map(|i| (date(i), 1.0)).collect();
    assert!(matches!(
        hit_statistic(&rs, &far, 0.5),
        Err(QRError::AlignmentError(_))
    ));
}

// ---------- out-of-sample R¹ ----------

#[test]
fn r1_oos_zero_against_own_benchmark() {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let n = 200;
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.8..1.2)).collect();
    let rs = series(values.clone());
    let window = 25;
    let tau = 0.25;
    // Forecast exactly equal to the rolling benchmark quantile.
    let mut forecast = Vec::new();
    for t in window..n {
        let mut w: Vec<f64> = values[t - window..t].to_vec();
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = ((window as f64 * tau).ceil() as usize).clamp(1, window);
        forecast.push((date(t as i64), w[k - 1]));
    }
    let r = r1_oos(&rs, &forecast, window, tau).unwrap();
    assert!(r.abs() < 1e-12, "R1_oos = {r}, want 0");
}

#[test]
fn r1_oos_negative_for_distant_constant_forecast() {
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let n = 150;
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.9..1.1)).collect();
    let rs = series(values);
    let forecast: Vec<(NaiveDate, f64)> = (0..n as i64).map(|i| (date(i), 5.0)).collect();
    let r = r1_oos(&rs, &forecast, 30, 0.2).unwrap();
    assert!(r < 0.0, "R1_oos = {r}, want negative");
}

#[test]
fn r1_oos_positive_when_forecasting_true_conditional_quantile() {
    // Heteroskedastic lognormal world: the conditional quantile beats the
    // unconditional rolling benchmark.
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let n = 400;
    let tau = 0.1;
    let z = -1.2815515655446004;
    let t_years: f64 = 30.0 / 365.0;
    let mut values = Vec::new();
    let mut forecast = Vec::new();
    for i in 0..n {
        let sigma: f64 = rng.gen_range(0.05..0.5);
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let eps = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        let st = sigma * t_years.sqrt();
        values.push((0.06 - 0.5 * sigma * sigma) * t_years + st * eps);
        forecast.push((
            date(i as i64),
            (0.06 - 0.5 * sigma * sigma) * t_years + st * z,
        ));
    }
    // Shift to gross-return scale to satisfy the series invariant.
    let values: Vec<f64> = values.iter().map(|v| v.exp()).collect();
    let forecast: Vec<(NaiveDate, f64)> = forecast.iter().map(|&(d, v)| (d, v.exp())).collect();
    let rs = series(values);
    let r = r1_oos(&rs, &forecast, 60, tau).unwrap();
    assert!(r > 0.05, "R1_oos = {r}, want clearly positive");
}

#[test]
fn r1_oos_window_must_fit() {
    let rs = series(vec![1.0; 30]);
    let forecast: Vec<(NaiveDate, f64)> = (0..30).map(|i| (date(i), 1.0)).collect();
    assert!(matches!(
        r1_oos(&rs, &forecast, 30, 0.5),
        Err(QRError::WindowTooLong { .. })
    ));
}

// ---------- expanding forecast ----------

#[test]
fn expanding_forecast_on_constant_data_is_the_constant() {
    let n = 130;
    let responses = vec![1.07; n];
    let quantiles = vec![1.02; n];
    // A constant regressor is collinear with the intercept, so feed mildly
    // varying quantiles mapping to constant responses.
    let quantiles: Vec<f64> = quantiles
        .iter()
        .enumerate()
        .map(|(i, &q)| q + 1e-3 * (i % 7) as f64)
        .collect();
    let out = expanding_forecast(&responses, &quantiles, 100, 0.5, 1).unwrap();
    assert_eq!(out.len(), n - 100);
    for f in out {
        assert!((f - 1.07).abs() < 1e-8, "forecast {f}, want 1.07");
    }
}

#[test]
fn expanding_forecast_tracks_true_quantile_in_heteroskedastic_world() {
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let n = 400;
    let tau = 0.1;
    let z = -1.2815515655446004;
    let t_years: f64 = 30.0 / 365.0;
    let (mu, r) = (0.07, 0.02);
    let mut responses = Vec::new();
    let mut rn_q = Vec::new();
    let mut true_q = Vec::new();
    for _ in 0..n {
        let sigma: f64 = rng.gen_range(0.1..0.4);
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let eps = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        let st = sigma * t_years.sqrt();
        responses.push(((mu - 0.5 * sigma * sigma) * t_years + st * eps).exp());
        rn_q.push(((r - 0.5 * sigma * sigma) * t_years + st * z).exp());
        true_q.push(((mu - 0.5 * sigma * sigma) * t_years + st * z).exp());
    }
    let out = expanding_forecast(&responses, &rn_q, 200, tau, 1).unwrap();
    let mut abs_err: Vec<f64> = out
        .iter()
        .zip(&true_q[200..])
        .map(|(f, q)| (f - q).abs() / q)
        .collect();
    abs_err.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = abs_err[abs_err.len() / 2];
    assert!(median <= 0.01, "median relative error {median}, want ≤ 1%");
}

#[test]
fn expanding_forecast_rejects_oversized_window() {
    let responses = vec![1.0; 120];
    let quantiles = vec![1.0; 120];
    assert!(matches!(
        expanding_forecast(&responses, &quantiles, 120, 0.5, 1),
        Err(QRError::WindowTooLong { .. })
    ));
}

// ---------- R¹ benchmark convention ----------

#[test]
fn r1_uses_in_sample_quantile_benchmark() {
    // For the intercept-only design, the fit IS the benchmark, so R¹ = 0.
    let ys: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() + 2.0).collect();
    for &tau in &[0.1, 0.5, 0.77] {
        let fit = qr_fit(&QRDesign::intercept_only(ys.clone(), tau).unwrap()).unwrap();
        assert!(
            fit.r1.abs() < 1e-10,
            "intercept-only R1 = {} at tau={tau}, want 0",
            fit.r1
        );
        assert!(fit.loss >= 0.0);
    }
}

#[test]
fn loss_equals_direct_pinball_evaluation() {
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    let n = 60;
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| 1.0 + x + rng.gen_range(-0.2..0.2)).collect();
    let tau = 0.35;
    let fit = qr_fit(&QRDesign::univariate(ys.clone(), xs.clone(), tau).unwrap()).unwrap();
    let resid: Vec<f64> = ys
        .iter()
        .zip(&xs)
        .map(|(&y, &x)| y - fit.beta[0] - fit.beta[1] * x)
        .collect();
    assert!((pinball_loss(&resid, tau) - fit.loss).abs() < 1e-10);
}
