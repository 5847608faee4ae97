//! Block-resampling engines for weakly dependent time series.
//!
//! Two block schemes are provided: the circular moving-block bootstrap with
//! fixed block length (optionally taper-weighted at block edges as a
//! substitute for the smooth extended tapered block bootstrap — same
//! robustness class, fully specified here), and the stationary bootstrap of
//! Politis and Romano (1994) with geometrically distributed block lengths.
//! Index streams are keyed by `(seed, replicate_id)`, so replicates can be
//! generated on any number of workers and still produce bitwise identical
//! results.

use crate::qr::{qr_fit, QRDesign, QRError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Resampling scheme for dependent data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Circular moving-block bootstrap: blocks of fixed length starting at
    /// uniform positions, wrapping around the end of the sample.
    MovingBlock,
    /// Politis–Romano stationary bootstrap: geometric block lengths with the
    /// configured expected length, circular wraparound.
    Stationary,
    /// Plain i.i.d. resampling with replacement.
    Iid,
}

/// Optional taper applied to observations near block edges (moving-block
/// scheme only). `width` is the half-window length in observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Taper {
    None,
    Cosine { width: usize },
}

impl Default for Taper {
    fn default() -> Self {
        Taper::None
    }
}

/// A fully specified resampling plan. Serialized into JSON outputs so every
/// bootstrap result carries its own provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub scheme: Scheme,
    /// Fixed block length (moving block) or expected block length (stationary).
    pub block_length: usize,
    pub n_replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub taper: Taper,
}

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("invalid resample plan: {0}")]
    InvalidPlan(String),
    #[error("full-sample fit failed before resampling: {0}")]
    FitFailed(String),
    #[error("{failed} of {total} bootstrap replicates failed to fit (over the 5% tolerance)")]
    TooManyFailures { failed: usize, total: usize },
}

impl ResamplePlan {
    pub fn new(scheme: Scheme, block_length: usize, n_replicates: usize, seed: u64) -> Self {
        ResamplePlan {
            scheme,
            block_length,
            n_replicates,
            seed,
            taper: Taper::None,
        }
    }

    /// Check the plan against a sample size.
    pub fn validate(&self, n: usize) -> Result<(), BootstrapError> {
        if self.block_length == 0 {
            return Err(BootstrapError::InvalidPlan(
                "block_length must be at least 1".into(),
            ));
        }
        if self.block_length > n {
            return Err(BootstrapError::InvalidPlan(format!(
                "block_length {} exceeds sample size {n}",
                self.block_length
            )));
        }
        if self.n_replicates < 2 {
            return Err(BootstrapError::InvalidPlan(
                "need at least 2 replicates".into(),
            ));
        }
        Ok(())
    }
}

fn replicate_rng(seed: u64, replicate_id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // Stream 0 is left for non-replicate use of the same seed.
    rng.set_stream(replicate_id.wrapping_add(1));
    rng
}

/// Draw the time-index vector for one bootstrap replicate.
///
/// Deterministic given `(plan.seed, replicate_id)` regardless of call order
/// or worker count.
pub fn resample_indices(plan: &ResamplePlan, n: usize, replicate_id: u64) -> Vec<usize> {
    let (idx, _) = resample_with_weights(plan, n, replicate_id);
    idx
}

/// As [`resample_indices`], returning the per-observation taper weight
/// alongside each index (all ones unless a moving-block taper is configured).
pub fn resample_with_weights(
    plan: &ResamplePlan,
    n: usize,
    replicate_id: u64,
) -> (Vec<usize>, Vec<f64>) {
    assert!(n > 0, "cannot resample an empty sample");
    let mut rng = replicate_rng(plan.seed, replicate_id);
    let l = plan.block_length.clamp(1, n);
    let mut idx = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    match plan.scheme {
        Scheme::MovingBlock => {
            let tw = taper_weights(l, plan.taper);
            while idx.len() < n {
                let start = rng.gen_range(0..n);
                for (k, &weight) in tw.iter().enumerate().take(l) {
                    if idx.len() == n {
                        break;
                    }
                    idx.push((start + k) % n);
                    w.push(weight);
                }
            }
        }
        Scheme::Stationary => {
            let p = 1.0 / l as f64;
            let mut cur = rng.gen_range(0..n);
            idx.push(cur);
            w.push(1.0);
            for _ in 1..n {
                if rng.gen::<f64>() < p {
                    cur = rng.gen_range(0..n);
                } else {
                    cur = (cur + 1) % n;
                }
                idx.push(cur);
                w.push(1.0);
            }
        }
        Scheme::Iid => {
            for _ in 0..n {
                idx.push(rng.gen_range(0..n));
                w.push(1.0);
            }
        }
    }
    (idx, w)
}

/// Per-position weights inside one block of length `l`.
fn taper_weights(l: usize, taper: Taper) -> Vec<f64> {
    match taper {
        Taper::None => vec![1.0; l],
        Taper::Cosine { width } => {
            let w = width.min(l / 2).max(1);
            (0..l)
                .map(|k| {
                    let edge = k.min(l - 1 - k);
                    if edge < w {
                        let u = (edge as f64 + 0.5) / w as f64;
                        (std::f64::consts::FRAC_PI_2 * u).sin().powi(2)
                    } else {
                        1.0
                    }
                })
                .collect()
        }
    }
}

/// Bootstrap covariance matrix of the quantile-regression coefficient vector.
///
/// Each replicate refits the regression on a block resample of the rows.
/// Taper weights (if any) enter through positive row scaling, which is exact
/// for the check loss since it is positively homogeneous. Replicates whose
/// fit fails are dropped and counted; more than 5% failures is an error.
/// The paper's convention of five times the prediction horizon is the
/// recommended block length for overlapping designs.
pub fn qr_boot_cov(
    design: &QRDesign,
    plan: &ResamplePlan,
) -> Result<Vec<Vec<f64>>, BootstrapError> {
    let n = design.responses.len();
    plan.validate(n)?;
    qr_fit(design).map_err(|e| BootstrapError::FitFailed(e.to_string()))?;
    let p = design.n_params();

    let betas: Vec<Option<Vec<f64>>> = (0..plan.n_replicates as u64)
        .into_par_iter()
        .map(|r| refit_replicate(design, plan, n, r).ok())
        .collect();

    let ok: Vec<&Vec<f64>> = betas.iter().flatten().collect();
    let failed = plan.n_replicates - ok.len();
    if failed * 20 > plan.n_replicates || ok.len() < 2 {
        return Err(BootstrapError::TooManyFailures {
            failed,
            total: plan.n_replicates,
        });
    }
    let m = ok.len() as f64;
    let mut mean = vec![0.0; p];
    for b in &ok {
        for (mj, bj) in mean.iter_mut().zip(b.iter()) {
            *mj += bj / m;
        }
    }
    let mut cov = vec![vec![0.0; p]; p];
    for b in &ok {
        for j in 0..p {
            for k in 0..p {
                cov[j][k] += (b[j] - mean[j]) * (b[k] - mean[k]) / (m - 1.0);
            }
        }
    }
    Ok(cov)
}

fn refit_replicate(
    design: &QRDesign,
    plan: &ResamplePlan,
    n: usize,
    replicate_id: u64,
) -> Result<Vec<f64>, QRError> {
    let (idx, w) = resample_with_weights(plan, n, replicate_id);
    let k = design.regressors.first().map_or(0, Vec::len);
    let mut responses = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for (&i, &wi) in idx.iter().zip(&w) {
        if wi <= 0.0 {
            continue;
        }
        responses.push(design.responses[i] * wi);
        let mut row = Vec::with_capacity(k + 1);
        if design.include_intercept {
            row.push(wi);
        }
        for v in &design.regressors[i] {
            row.push(v * wi);
        }
        rows.push(row);
    }
    let resampled = QRDesign::new(responses, rows, design.tau, false)?;
    let fit = qr_fit(&resampled)?;
    Ok(fit.beta)
}
