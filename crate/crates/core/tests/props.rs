//! Property-based invariants: quote cleaning is idempotent, fitted
//! distributions invert consistently, and the monotone-regression repair
//! behaves as an order-preserving projection.

use chrono::NaiveDate;
use proptest::prelude::*;
use rnq_core::market_data::{clean_quotes, OptionFlag, RawOptionQuote};
use rnq_core::math::isotonic_nondecreasing;
use rnq_core::rnd::{bs_call_unit, bs_put_unit, DistributionEstimate, MeasureTag};

fn chain_strategy() -> impl Strategy<Value = Vec<RawOptionQuote>> {
    (
        8usize..16,
        0.15f64..0.4,
        30i64..60,
        0.0f64..0.08,
        0.9f64..1.1,
    )
        .prop_map(|(n, vol, maturity, half_spread, price_jitter)| {
            let obs = NaiveDate::from_ymd_opt(2001, 3, 12).unwrap();
            let expiry = obs + chrono::Duration::days(maturity);
            let spot = 100.0;
            let rf = 1.004f64;
            let t = maturity as f64 / 365.0;
            let fwd_m = rf;
            (0..n)
                .map(|i| {
                    let m = 0.7 + 0.6 * i as f64 / (n - 1) as f64;
                    let strike = spot * m;
                    let (flag, unit) = if m <= fwd_m {
                        (OptionFlag::Put, bs_put_unit(m, fwd_m, vol, t, rf))
                    } else {
                        (OptionFlag::Call, bs_call_unit(m, fwd_m, vol, t, rf))
                    };
                    let mid = (unit * spot * price_jitter).max(1e-4);
                    RawOptionQuote {
                        observation_date: obs,
                        expiry_date: expiry,
                        strike,
                        flag,
                        bid: mid * (1.0 - half_spread),
                        ask: mid * (1.0 + half_spread),
                        underlying: spot,
                        forward: None,
                        risk_free_gross: rf,
                    }
                })
                .collect()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn cleaning_is_idempotent(raw in chain_strategy()) {
        let Ok(once) = clean_quotes(&raw, 7, 365) else {
            // Heavy jitter can kill every quote; nothing left to test.
            return Ok(());
        };
        // Re-expose the cleaned chains as raw quotes at zero spread.
        let recycled: Vec<RawOptionQuote> = once
            .iter()
            .flat_map(|chain| {
                chain.quotes.iter().map(move |q| RawOptionQuote {
                    observation_date: chain.observation_date,
                    expiry_date: chain.observation_date
                        + chrono::Duration::days(chain.maturity_days),
                    strike: q.strike,
                    flag: q.flag,
                    bid: q.midprice,
                    ask: q.midprice,
                    underlying: chain.underlying,
                    forward: chain.forward,
                    risk_free_gross: chain.risk_free_gross,
                })
            })
            .collect();
        let twice = clean_quotes(&recycled, 7, 365).expect("cleaned quotes must survive");
        prop_assert_eq!(once.len(), twice.len());
        for (a, b) in once.iter().zip(&twice) {
            prop_assert_eq!(a.quotes.len(), b.quotes.len());
            for (qa, qb) in a.quotes.iter().zip(&b.quotes) {
                prop_assert_eq!(qa.strike, qb.strike);
                prop_assert_eq!(qa.flag, qb.flag);
                prop_assert!((qa.midprice - qb.midprice).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quantile_and_cdf_are_mutually_consistent(
        w in 0.2f64..0.8,
        m1 in -0.15f64..0.0,
        m2 in 0.0f64..0.15,
        s1 in 0.05f64..0.3,
        s2 in 0.05f64..0.3,
        p in 0.02f64..0.98,
    ) {
        // Two-component lognormal mixture, tabulated like a fitted result.
        let normal_cdf = |z: f64| {
            let x = z / std::f64::consts::SQRT_2;
            let (sign, x) = if x < 0.0 { (-1.0, -x) } else { (1.0, x) };
            let t = 1.0 / (1.0 + 0.3275911 * x);
            let y = 1.0
                - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t
                    - 0.284496736) * t
                    + 0.254829592)
                    * t
                    * (-x * x).exp();
            0.5 * (1.0 + sign * y)
        };
        let cdf_fn = |x: f64| {
            w * normal_cdf((x.ln() - m1) / s1) + (1.0 - w) * normal_cdf((x.ln() - m2) / s2)
        };
        let pdf_fn = |x: f64| {
            let comp = |m: f64, s: f64| {
                let z = (x.ln() - m) / s;
                (-0.5 * z * z).exp() / (x * s * (2.0 * std::f64::consts::PI).sqrt())
            };
            w * comp(m1, s1) + (1.0 - w) * comp(m2, s2)
        };
        let lo = (m1 - 7.0 * s1).exp().min((m2 - 7.0 * s2).exp());
        let hi = (m1 + 7.0 * s1).exp().max((m2 + 7.0 * s2).exp());
        let n = 3001;
        let grid: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let dist = DistributionEstimate::from_functions(
            grid, cdf_fn, pdf_fn, MeasureTag::RiskNeutral, 30,
        )
        .unwrap();

        let q = dist.quantile(p);
        prop_assert!((dist.cdf_at(q) - p).abs() < 2e-3,
            "round trip: cdf(quantile({})) = {}", p, dist.cdf_at(q));
        // Generalized inverse: quantile(cdf(x)) never exceeds x where the
        // CDF is strictly rising.
        let x = 0.5 * (q + hi.min(q * 1.1));
        let back = dist.quantile(dist.cdf_at(x).clamp(1e-6, 1.0 - 1e-6));
        prop_assert!(back <= x + (hi - lo) / 1000.0,
            "generalized inverse overshot: {} vs {}", back, x);
    }

    #[test]
    fn monotone_repair_is_an_order_preserving_projection(
        ys in prop::collection::vec(-5.0f64..5.0, 2..40)
    ) {
        let fixed = isotonic_nondecreasing(&ys);
        prop_assert_eq!(fixed.len(), ys.len());
        for w in fixed.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "not monotone: {:?}", w);
        }
        // Projection: applying it twice changes nothing.
        let again = isotonic_nondecreasing(&fixed);
        for (a, b) in fixed.iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        // Pool-adjacent-violators preserves the total mass.
        let sum_in: f64 = ys.iter().sum();
        let sum_out: f64 = fixed.iter().sum();
        prop_assert!((sum_in - sum_out).abs() < 1e-9 * ys.len() as f64);
        // Already-sorted input is a fixed point.
        let mut sorted = ys.clone();
        sorted.sort_by(f64::total_cmp);
        let kept = isotonic_nondecreasing(&sorted);
        for (a, b) in sorted.iter().zip(&kept) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
