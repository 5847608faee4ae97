//! Toolkit for measuring the gap between option-implied (risk-neutral) and
//! realized (physical) return distributions, quantile by quantile.
//!
//! The crate is organized as a pipeline plus an analytic model zoo:
//!
//! * [`market_data`] — ingestion and cleaning of raw option quotes and index
//!   levels; construction of fixed-horizon return series.
//! * [`rnd`] — per-date risk-neutral CDF/quantile/density estimation from an
//!   option chain (implied-vol interpolation + Breeden–Litzenberger
//!   differentiation), maturity interpolation, and risk-neutral moments.
//! * [`qr`] — pinball-loss quantile regression (interior-point solver with an
//!   exact vertex polish), fit statistics, Wald tests, and expanding-window
//!   forecasts.
//! * [`bounds`] — ordinal dominance curve, the per-quantile SDF volatility
//!   bound, the Hansen–Jagannathan bound, higher-order quantile bounds, and a
//!   bootstrap dominance test.
//! * [`riskadjust`] — option-implied lower bound on the physical-quantile gap
//!   and the risk-adjusted quantile predictor.
//! * [`models`] — closed-form model zoo (joint normal, lognormal, Pareto,
//!   rare-disaster, representative agent) used both for production defaults
//!   and as test oracles, plus simulation DGPs.
//! * [`bootstrap`] — moving-block, stationary, and iid resampling engines
//!   with replicate-keyed deterministic RNG streams.

pub mod bootstrap;
pub mod bounds;
pub mod market_data;
pub mod math;
pub mod models;
pub mod qr;
pub mod riskadjust;
pub mod rnd;
