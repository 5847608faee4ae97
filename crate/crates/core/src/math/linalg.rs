//! Small dense linear-algebra routines (row-major `Vec<Vec<f64>>`), sized for
//! the low-dimensional systems that appear in quantile regression and
//! covariance handling.

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    debug_assert!(a.iter().all(|row| row.len() == n));
    debug_assert_eq!(b.len(), n);
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1e-300);

    for k in 0..n {
        let (piv_row, piv_val) = (k..n)
            .map(|i| (i, m[i][k].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if piv_val <= 1e-13 * scale {
            return None;
        }
        m.swap(k, piv_row);
        rhs.swap(k, piv_row);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s -= m[k][j] * x[j];
        }
        x[k] = s / m[k][k];
    }
    Some(x)
}

/// Cholesky factorization of a symmetric positive-definite matrix.
/// Returns the lower factor, or `None` if the matrix is not numerically SPD.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solve `a x = b` for symmetric positive-definite `a` via Cholesky.
pub fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let l = cholesky(a)?;
    let n = b.len();
    // Forward substitution L y = b.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    // Back substitution Lᵀ x = y.
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

/// Numerical rank of an n×p row-major matrix by Gaussian elimination with
/// full column scan, relative tolerance `1e-10`.
pub fn mat_rank(x: &[Vec<f64>]) -> usize {
    if x.is_empty() {
        return 0;
    }
    let p = x[0].len();
    let mut m: Vec<Vec<f64>> = x.to_vec();
    let n = m.len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1e-300);
    let tol = 1e-10 * scale;
    let mut rank = 0;
    let mut row = 0;
    for col in 0..p {
        let Some((piv, val)) = (row..n)
            .map(|i| (i, m[i][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            break;
        };
        if val <= tol {
            continue;
        }
        m.swap(row, piv);
        for i in row + 1..n {
            let f = m[i][col] / m[row][col];
            if f == 0.0 {
                continue;
            }
            for j in col..p {
                m[i][j] -= f * m[row][j];
            }
        }
        rank += 1;
        row += 1;
        if row == n {
            break;
        }
    }
    rank
}
