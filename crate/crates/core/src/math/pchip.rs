//! Monotone piecewise-cubic Hermite interpolation with the Fritsch–Carlson
//! (1980) slope limiter: the interpolant preserves monotonicity of the data on
//! every interval and is C¹ everywhere.

/// A fitted monotone cubic interpolant.
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    /// Fit to `(xs, ys)` with strictly increasing `xs` and at least two
    /// points.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 2, "pchip needs at least two points");
        assert!(
            xs.windows(2).all(|w| w[1] > w[0]),
            "pchip abscissae must be strictly increasing"
        );
        let n = xs.len();
        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    d[i] = 0.0;
                } else {
                    // Weighted harmonic mean of adjacent secants.
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            ds: d,
        }
    }

    /// Evaluate at `x`; extrapolates with the boundary cubic outside the range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let j = if x <= self.xs[0] {
            0
        } else if x >= self.xs[n - 1] {
            n - 2
        } else {
            self.xs.partition_point(|&v| v <= x) - 1
        };
        let h = self.xs[j + 1] - self.xs[j];
        let t = (x - self.xs[j]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[j] + h10 * h * self.ds[j] + h01 * self.ys[j + 1] + h11 * h * self.ds[j + 1]
    }
}

/// Three-point end-slope estimate, limited so the end interval stays monotone.
fn edge_slope(h0: f64, h1: f64, delta0: f64, delta1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * delta0 - h0 * delta1) / (h0 + h1);
    if d.signum() != delta0.signum() || delta0 == 0.0 {
        0.0
    } else if delta0.signum() != delta1.signum() && d.abs() > 3.0 * delta0.abs() {
        3.0 * delta0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn interpolates_knots_exactly() {
        let xs = [0.0, 1.0, 2.5, 4.0];
        let ys = [1.0, 0.5, 0.4, 0.1];
        let p = Pchip::fit(&xs, &ys);
        for (x, y) in xs.iter().zip(ys.iter()) {
            assert_abs_diff_eq!(p.eval(*x), *y, epsilon = 1e-14);
        }
    }

    #[test]
    fn constant_data_stays_constant() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.2, 0.2, 0.2, 0.2];
        let p = Pchip::fit(&xs, &ys);
        for i in 0..=30 {
            assert_abs_diff_eq!(p.eval(i as f64 * 0.1), 0.2, epsilon = 1e-14);
        }
    }

    #[test]
    fn preserves_monotonicity_between_knots() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.0, 0.9, 0.95, 0.96, 2.0];
        let p = Pchip::fit(&xs, &ys);
        let mut prev = p.eval(0.0);
        for i in 1..=400 {
            let cur = p.eval(i as f64 * 0.01);
            assert!(cur >= prev - 1e-12, "non-monotone at {}", i);
            prev = cur;
        }
    }
}
