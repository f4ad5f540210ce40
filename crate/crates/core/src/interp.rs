//! Periodic cubic splines for resampling closed curves and periodic signals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Vector-valued periodic cubic spline with period `period`.
#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    knots: Vec<f64>,
    period: f64,
    /// Values, one column per knot.
    y: DMatrix<f64>,
    /// Second derivatives at the knots.
    m: DMatrix<f64>,
}

impl PeriodicSpline {
    /// `knots` strictly increasing within `[t0, t0 + period)`; `values[k]` at `knots[k]`.
    pub fn new(knots: &[f64], values: &[DVector<f64>], period: f64) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(Error::InvalidInput(format!("periodic spline needs >= 3 knots with values, got {n}")));
        }
        if !(period > 0.0) || knots.windows(2).any(|w| w[1] <= w[0]) || knots[n - 1] - knots[0] >= period {
            return Err(Error::InvalidInput("spline knots must increase within one period".into()));
        }
        let dim = values[0].len();
        let mut y = DMatrix::zeros(dim, n);
        for (k, v) in values.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Dimension("spline values differ in length".into()));
            }
            y.set_column(k, v);
        }
        let h = |k: usize| {
            if k + 1 < n {
                knots[k + 1] - knots[k]
            } else {
                knots[0] + period - knots[n - 1]
            }
        };
        // Cyclic tridiagonal system for the second derivatives.
        let mut a = DMatrix::zeros(n, n);
        let mut rhs = DMatrix::zeros(n, dim);
        for k in 0..n {
            let km = (k + n - 1) % n;
            let kp = (k + 1) % n;
            let (h0, h1) = (h(km), h(k));
            a[(k, km)] += h0 / 6.0;
            a[(k, k)] += (h0 + h1) / 3.0;
            a[(k, kp)] += h1 / 6.0;
            for d in 0..dim {
                rhs[(k, d)] = (y[(d, kp)] - y[(d, k)]) / h1 - (y[(d, k)] - y[(d, km)]) / h0;
            }
        }
        let m = a.lu().solve(&rhs).ok_or_else(|| Error::Singular("spline system".into()))?.transpose();
        Ok(Self { knots: knots.to_vec(), period, y, m })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    fn locate(&self, t: f64) -> (usize, usize, f64, f64) {
        let n = self.knots.len();
        let t0 = self.knots[0];
        let s = t0 + (t - t0).rem_euclid(self.period);
        let k = match self.knots.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        let (kp, h) = if k + 1 < n { (k + 1, self.knots[k + 1] - self.knots[k]) } else { (0, t0 + self.period - self.knots[k]) };
        (k, kp, s - self.knots[k], h)
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let (k, kp, x, h) = self.locate(t);
        let a = (h - x) / h;
        let b = x / h;
        let c = (a * a * a - a) * h * h / 6.0;
        let d = (b * b * b - b) * h * h / 6.0;
        self.y.column(k) * a + self.y.column(kp) * b + self.m.column(k) * c + self.m.column(kp) * d
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        let (k, kp, x, h) = self.locate(t);
        let a = (h - x) / h;
        let b = x / h;
        (self.y.column(kp) - self.y.column(k)) / h - self.m.column(k) * ((3.0 * a * a - 1.0) * h / 6.0)
            + self.m.column(kp) * ((3.0 * b * b - 1.0) * h / 6.0)
    }
}
