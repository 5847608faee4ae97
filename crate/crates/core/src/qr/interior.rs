//! Interior-point solver for pinball-loss minimization.
//!
//! The check-function problem min_β Σ_t ρ_τ(y_t − x_tᵀβ) is solved through
//! its bounded-variables dual
//!
//!   max yᵀa   s.t.   Xᵀa = (1−τ) Xᵀ1,   a ∈ [0,1]ⁿ,
//!
//! by a primal–dual log-barrier method with Mehrotra predictor–corrector
//! steps (the Frisch–Newton approach of Portnoy & Koenker, 1997). The
//! coefficient vector is the negative of the multiplier on the equality
//! constraints. A crossover then lands on an exact basic solution — a vertex
//! interpolating p observations — and a few simplex pivots certify
//! optimality; ties between optimal vertices are broken toward the smallest
//! coefficient 2-norm.

use super::QRError;
use crate::math::linalg::{cholesky_solve, solve_linear};

/// Pinball loss Σ ρ_τ(r) with ρ_τ(x) = x(τ − 1{x<0}).
pub fn pinball_loss(residuals: &[f64], tau: f64) -> f64 {
    residuals
        .iter()
        .map(|&r| if r < 0.0 { r * (tau - 1.0) } else { r * tau })
        .sum()
}

fn residuals(x: &[Vec<f64>], y: &[f64], beta: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(y)
        .map(|(row, &yi)| yi - dot(row, beta))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Largest step α ≤ 1 with v + α dv ≥ (1−η)·v componentwise.
fn step_length(v: &[f64], dv: &[f64]) -> f64 {
    let mut alpha = 1.0f64;
    for (&vi, &di) in v.iter().zip(dv) {
        if di < 0.0 {
            alpha = alpha.min(-0.9995 * vi / di);
        }
    }
    alpha.min(1.0)
}

/// Run the interior-point iteration; returns an approximate minimizer.
/// `x` is the full design matrix (n×p, intercept included when wanted).
fn interior_point(x: &[Vec<f64>], y: &[f64], tau: f64, max_iter: usize) -> Result<Vec<f64>, QRError> {
    let n = x.len();
    let p = x[0].len();

    // Dual variables a ∈ (0,1)ⁿ with slack s = 1 − a; the start a = (1−τ)1
    // satisfies the equality constraints exactly.
    let mut a = vec![1.0 - tau; n];
    let mut s = vec![tau; n];

    // Multiplier initialized from the least-squares fit of c = −y on X.
    let c: Vec<f64> = y.iter().map(|&v| -v).collect();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xtc = vec![0.0; p];
    for (row, &ci) in x.iter().zip(&c) {
        for j in 0..p {
            xtc[j] += row[j] * ci;
            for k in 0..=j {
                xtx[j][k] += row[j] * row[k];
            }
        }
    }
    for j in 0..p {
        for k in j + 1..p {
            xtx[j][k] = xtx[k][j];
        }
    }
    let mut lambda = cholesky_solve(&xtx, &xtc)
        .or_else(|| solve_linear(&xtx, &xtc))
        .ok_or(QRError::DegenerateDesign)?;

    // Dual slacks z, w chosen so z − w = c − Xλ holds exactly while both
    // stay safely interior.
    let rd0: Vec<f64> = x
        .iter()
        .zip(&c)
        .map(|(row, &ci)| ci - dot(row, &lambda))
        .collect();
    let shift = (rd0.iter().map(|v| v.abs()).sum::<f64>() / n as f64).max(1e-3) * 0.1;
    let mut z: Vec<f64> = rd0.iter().map(|&r| r.max(0.0) + shift).collect();
    let mut w: Vec<f64> = rd0.iter().map(|&r| (-r).max(0.0) + shift).collect();

    let obj_scale = 1.0 + y.iter().map(|v| v.abs()).sum::<f64>() / n as f64;

    for _ in 0..max_iter {
        let gap: f64 = a.iter().zip(&z).map(|(u, v)| u * v).sum::<f64>()
            + s.iter().zip(&w).map(|(u, v)| u * v).sum::<f64>();
        if gap / (n as f64 * obj_scale) < 1e-12 {
            break;
        }
        let mu = gap / (2.0 * n as f64);

        // Residuals of the KKT equalities (kept for drift robustness; they
        // stay at rounding level because the start is feasible).
        let mut rp = vec![0.0; p];
        for (row, &ai) in x.iter().zip(&a) {
            for j in 0..p {
                rp[j] -= row[j] * ai;
            }
        }
        for (row, _) in x.iter().zip(&a) {
            for j in 0..p {
                rp[j] += row[j] * (1.0 - tau);
            }
        }
        let rd: Vec<f64> = (0..n)
            .map(|i| c[i] - dot(&x[i], &lambda) - z[i] + w[i])
            .collect();
        let ru: Vec<f64> = (0..n).map(|i| 1.0 - a[i] - s[i]).collect();

        let d: Vec<f64> = (0..n).map(|i| 1.0 / (z[i] / a[i] + w[i] / s[i])).collect();

        // One Newton solve given complementarity targets (rxz, rsw).
        let solve_direction = |rxz: &[f64], rsw: &[f64]| -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
            let g: Vec<f64> = (0..n)
                .map(|i| rd[i] - rxz[i] / a[i] + (rsw[i] - w[i] * ru[i]) / s[i])
                .collect();
            // Normal equations M dλ = rp + Σ dᵢ gᵢ xᵢ with M = Σ dᵢ xᵢxᵢᵀ.
            let mut m = vec![vec![0.0; p]; p];
            let mut rhs = rp.clone();
            for i in 0..n {
                let di = d[i];
                for j in 0..p {
                    rhs[j] += di * g[i] * x[i][j];
                    for k in 0..=j {
                        m[j][k] += di * x[i][j] * x[i][k];
                    }
                }
            }
            for j in 0..p {
                for k in j + 1..p {
                    m[j][k] = m[k][j];
                }
            }
            let dlambda = cholesky_solve(&m, &rhs).or_else(|| {
                // Late-stage ill-conditioning: retry with a small ridge.
                let tr: f64 = (0..p).map(|j| m[j][j]).sum();
                let mut mr = m.clone();
                for j in 0..p {
                    mr[j][j] += 1e-12 * tr.max(1.0);
                }
                cholesky_solve(&mr, &rhs)
            })?;
            let da: Vec<f64> = (0..n)
                .map(|i| d[i] * (dot(&x[i], &dlambda) - g[i]))
                .collect();
            let ds: Vec<f64> = (0..n).map(|i| ru[i] - da[i]).collect();
            let dz: Vec<f64> = (0..n).map(|i| (rxz[i] - z[i] * da[i]) / a[i]).collect();
            let dw: Vec<f64> = (0..n).map(|i| (rsw[i] - w[i] * ds[i]) / s[i]).collect();
            Some((dlambda, da, ds, dz, dw))
        };

        // Predictor (affine-scaling) direction.
        let rxz_aff: Vec<f64> = (0..n).map(|i| -a[i] * z[i]).collect();
        let rsw_aff: Vec<f64> = (0..n).map(|i| -s[i] * w[i]).collect();
        let Some((_, da_a, ds_a, dz_a, dw_a)) = solve_direction(&rxz_aff, &rsw_aff) else {
            break;
        };
        let ap_aff = step_length(&a, &da_a).min(step_length(&s, &ds_a));
        let ad_aff = step_length(&z, &dz_a).min(step_length(&w, &dw_a));
        let mut gap_aff = 0.0;
        for i in 0..n {
            gap_aff += (a[i] + ap_aff * da_a[i]) * (z[i] + ad_aff * dz_a[i]);
            gap_aff += (s[i] + ap_aff * ds_a[i]) * (w[i] + ad_aff * dw_a[i]);
        }
        let mu_aff = gap_aff / (2.0 * n as f64);
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // Corrector direction with recentering.
        let rxz: Vec<f64> = (0..n)
            .map(|i| sigma * mu - a[i] * z[i] - da_a[i] * dz_a[i])
            .collect();
        let rsw: Vec<f64> = (0..n)
            .map(|i| sigma * mu - s[i] * w[i] - ds_a[i] * dw_a[i])
            .collect();
        let Some((dlambda, da, ds, dz, dw)) = solve_direction(&rxz, &rsw) else {
            break;
        };
        let alpha_p = step_length(&a, &da).min(step_length(&s, &ds));
        let alpha_d = step_length(&z, &dz).min(step_length(&w, &dw));
        if alpha_p < 1e-14 && alpha_d < 1e-14 {
            break;
        }
        for i in 0..n {
            a[i] += alpha_p * da[i];
            s[i] += alpha_p * ds[i];
            z[i] += alpha_d * dz[i];
            w[i] += alpha_d * dw[i];
        }
        for j in 0..p {
            lambda[j] += alpha_d * dlambda[j];
        }
    }

    Ok(lambda.iter().map(|&v| -v).collect())
}

/// Greedily pick p rows with the smallest |residual| that form a nonsingular
/// basis; returns row indices.
fn select_basis(x: &[Vec<f64>], resid: &[f64]) -> Result<Vec<usize>, QRError> {
    let n = x.len();
    let p = x[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| resid[i].abs().total_cmp(&resid[j].abs()));

    let mut basis: Vec<usize> = Vec::with_capacity(p);
    // Orthonormalized span of the accepted rows (modified Gram–Schmidt).
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
    for &i in &order {
        if basis.len() == p {
            break;
        }
        let mut row = x[i].clone();
        for q in &ortho {
            let proj = dot(&row, q);
            for j in 0..p {
                row[j] -= proj * q[j];
            }
        }
        let norm_orig = x[i].iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let norm_red = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_red > 1e-9 * norm_orig {
            for v in row.iter_mut() {
                *v /= norm_red;
            }
            ortho.push(row);
            basis.push(i);
        }
    }
    if basis.len() < p {
        return Err(QRError::DegenerateDesign);
    }
    basis.sort_unstable();
    Ok(basis)
}

fn vertex_beta(x: &[Vec<f64>], y: &[f64], basis: &[usize]) -> Option<Vec<f64>> {
    let p = x[0].len();
    let xb: Vec<Vec<f64>> = basis.iter().map(|&i| x[i].clone()).collect();
    let yb: Vec<f64> = basis.iter().map(|&i| y[i]).collect();
    // Solve the p×p interpolation system row-wise: xb β = yb.
    let a: Vec<Vec<f64>> = (0..p).map(|r| xb[r].clone()).collect();
    solve_linear(&a, &yb)
}

/// One-sided directional derivative of the objective at β along δ.
fn directional_derivative(x: &[Vec<f64>], resid: &[f64], tau: f64, delta: &[f64], zero_tol: f64) -> f64 {
    let mut dd = 0.0;
    for (row, &r) in x.iter().zip(resid) {
        let u = dot(row, delta);
        if r > zero_tol {
            dd += -tau * u;
        } else if r < -zero_tol {
            dd += (1.0 - tau) * u;
        } else {
            dd += (-tau * u).max((1.0 - tau) * u);
        }
    }
    dd
}

/// Exact vertex solution by crossover from an approximate minimizer, followed
/// by simplex pivots to certified optimality and a deterministic
/// smallest-‖β‖₂ tie-break across equal-objective adjacent vertices.
fn crossover_polish(
    x: &[Vec<f64>],
    y: &[f64],
    tau: f64,
    beta_approx: &[f64],
) -> Result<Vec<f64>, QRError> {
    let n = x.len();
    let p = x[0].len();
    let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let zero_tol = 1e-9 * scale;
    let opt_tol = 1e-9 * scale;

    let r0 = residuals(x, y, beta_approx);
    let mut basis = select_basis(x, &r0)?;
    let mut beta = vertex_beta(x, y, &basis).ok_or(QRError::DegenerateDesign)?;

    let max_pivots = 10 * n + 200;
    let mut pivots = 0usize;
    loop {
        let resid = residuals(x, y, &beta);

        // Edge directions of the current vertex: δ_k solves X_B δ = e_k.
        let xb: Vec<Vec<f64>> = basis.iter().map(|&i| x[i].clone()).collect();
        let mut best: Option<(f64, Vec<f64>, usize)> = None;
        for k in 0..p {
            let mut e = vec![0.0; p];
            e[k] = 1.0;
            let Some(delta) = solve_linear(&xb, &e) else {
                return Err(QRError::DegenerateDesign);
            };
            for dir in [1.0f64, -1.0] {
                let d: Vec<f64> = delta.iter().map(|v| v * dir).collect();
                let dd = directional_derivative(x, &resid, tau, &d, zero_tol);
                if dd < -opt_tol && best.as_ref().is_none_or(|b| dd < b.0) {
                    best = Some((dd, d.clone(), k));
                }
            }
        }

        let Some((_, delta, leave_slot)) = best else {
            break; // Optimal vertex.
        };
        pivots += 1;
        if pivots > max_pivots {
            return Err(QRError::NonConvergence);
        }

        // Ratio test: moving β → β + tδ, residual i crosses zero at
        // t = r_i / (x_iᵀδ) when the signs agree.
        let mut t_star = f64::INFINITY;
        let mut entering = usize::MAX;
        for i in 0..n {
            if basis.contains(&i) {
                continue;
            }
            let u = dot(&x[i], &delta);
            if u.abs() < 1e-14 {
                continue;
            }
            let t = resid[i] / u;
            if t > 1e-13 && (t < t_star - 1e-13 || (t < t_star + 1e-13 && i < entering)) {
                t_star = t;
                entering = i;
            }
        }
        if entering == usize::MAX {
            // Descent direction with no blocking constraint cannot occur for
            // a bounded-below objective; treat as converged.
            break;
        }
        let leave_idx = basis[leave_slot];
        basis.retain(|&i| i != leave_idx);
        basis.push(entering);
        basis.sort_unstable();
        beta = vertex_beta(x, y, &basis).ok_or(QRError::DegenerateDesign)?;
    }

    // Tie-break: walk zero-derivative edges to adjacent optimal vertices with
    // strictly smaller coefficient norm.
    let norm2 = |b: &[f64]| b.iter().map(|v| v * v).sum::<f64>();
    let mut obj = pinball_loss(&residuals(x, y, &beta), tau);
    for _ in 0..50 {
        let resid = residuals(x, y, &beta);
        let xb: Vec<Vec<f64>> = basis.iter().map(|&i| x[i].clone()).collect();
        let mut moved = false;
        'edges: for k in 0..p {
            let mut e = vec![0.0; p];
            e[k] = 1.0;
            let Some(delta) = solve_linear(&xb, &e) else {
                break;
            };
            for dir in [1.0f64, -1.0] {
                let d: Vec<f64> = delta.iter().map(|v| v * dir).collect();
                let dd = directional_derivative(x, &resid, tau, &d, zero_tol);
                if dd.abs() > opt_tol {
                    continue;
                }
                // Flat edge: find the adjacent vertex along it.
                let mut t_star = f64::INFINITY;
                let mut entering = usize::MAX;
                for i in 0..n {
                    if basis.contains(&i) {
                        continue;
                    }
                    let u = dot(&x[i], &d);
                    if u.abs() < 1e-14 {
                        continue;
                    }
                    let t = resid[i] / u;
                    if t > 1e-13 && t < t_star {
                        t_star = t;
                        entering = i;
                    }
                }
                if entering == usize::MAX {
                    continue;
                }
                let mut cand_basis = basis.clone();
                cand_basis.retain(|&i| i != basis[k]);
                cand_basis.push(entering);
                cand_basis.sort_unstable();
                let Some(cand) = vertex_beta(x, y, &cand_basis) else {
                    continue;
                };
                let cand_obj = pinball_loss(&residuals(x, y, &cand), tau);
                if cand_obj <= obj + opt_tol && norm2(&cand) < norm2(&beta) - 1e-12 {
                    basis = cand_basis;
                    beta = cand;
                    obj = obj.min(cand_obj);
                    moved = true;
                    break 'edges;
                }
            }
        }
        if !moved {
            break;
        }
    }

    Ok(beta)
}

/// Solve the pinball minimization for a full design matrix (n×p).
pub(super) fn solve_pinball(x: &[Vec<f64>], y: &[f64], tau: f64) -> Result<Vec<f64>, QRError> {
    let beta_ip = interior_point(x, y, tau, 100)?;
    crossover_polish(x, y, tau, &beta_ip)
}
