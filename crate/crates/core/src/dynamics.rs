//! Vector fields consumed by the continuation, collocation and shooting code.

use nalgebra::{DMatrix, DVector};

use crate::model::FirstOrderSystem;

/// `x' = f(t, x, p)`. Autonomous fields ignore `t`.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn rhs(&self, t: f64, x: &DVector<f64>, p: &[f64]) -> DVector<f64>;
    fn jac_x(&self, t: f64, x: &DVector<f64>, p: &[f64]) -> DMatrix<f64>;

    /// Derivatives with respect to the parameters; central differences unless overridden.
    fn jac_p(&self, t: f64, x: &DVector<f64>, p: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), self.n_params());
        let mut q = p.to_vec();
        for k in 0..self.n_params() {
            let h = 1e-7 * p[k].abs().max(1.0);
            q[k] = p[k] + h;
            let fp = self.rhs(t, x, &q);
            q[k] = p[k] - h;
            let fm = self.rhs(t, x, &q);
            q[k] = p[k];
            out.set_column(k, &((fp - fm) / (2.0 * h)));
        }
        out
    }

    /// Explicit time derivative `df/dt`; zero for autonomous fields, central differences otherwise.
    fn jac_t(&self, t: f64, x: &DVector<f64>, p: &[f64]) -> DVector<f64> {
        if self.is_autonomous() {
            return DVector::zeros(self.dim());
        }
        let h = 1e-6 * t.abs().max(1.0);
        (self.rhs(t + h, x, p) - self.rhs(t - h, x, p)) / (2.0 * h)
    }

    fn is_autonomous(&self) -> bool {
        true
    }

    /// Forcing frequency for non-autonomous fields, read from the parameters.
    fn forcing_frequency(&self, _p: &[f64]) -> Option<f64> {
        None
    }
}

/// The full first-order system with parameters `[Omega, eps]`, forced by `cos(Omega t)`.
pub struct FullSystem<'a> {
    pub sys: &'a FirstOrderSystem,
}

impl Dynamics for FullSystem<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn n_params(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, x: &DVector<f64>, p: &[f64]) -> DVector<f64> {
        self.sys.rhs(x, p[0] * t, p[1])
    }

    fn jac_x(&self, _t: f64, x: &DVector<f64>, _p: &[f64]) -> DMatrix<f64> {
        self.sys.rhs_jacobian(x)
    }

    fn jac_p(&self, t: f64, _x: &DVector<f64>, p: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, 2);
        let binv = self.sys.b_inv();
        let phi = p[0] * t;
        // d/dOmega of eps * 2 Re(F_a e^{i Omega t}) = -2 eps t Im(F_a e^{i phi}).
        let e = num_complex::Complex64::from_polar(1.0, phi);
        let d_om = self.sys.f_a.map(|f| -2.0 * p[1] * t * (f * e).im);
        out.set_column(0, &(binv * d_om));
        out.set_column(1, &(binv * self.sys.forcing(phi)));
        out
    }

    fn jac_t(&self, t: f64, _x: &DVector<f64>, p: &[f64]) -> DVector<f64> {
        let e = num_complex::Complex64::from_polar(1.0, p[0] * t);
        let d = self.sys.f_a.map(|f| -2.0 * p[1] * p[0] * (f * e).im);
        self.sys.b_inv() * d
    }

    fn is_autonomous(&self) -> bool {
        false
    }

    fn forcing_frequency(&self, p: &[f64]) -> Option<f64> {
        Some(p[0])
    }
}

/// Central-difference Jacobian, used by tests and as a fallback.
pub fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, rel: f64) -> DMatrix<f64> {
    let f0 = f(x);
    let mut jac = DMatrix::zeros(f0.len(), x.len());
    let mut y = x.clone();
    for k in 0..x.len() {
        let h = rel * x[k].abs().max(1.0);
        y[k] = x[k] + h;
        let fp = f(&y);
        y[k] = x[k] - h;
        let fm = f(&y);
        y[k] = x[k];
        jac.set_column(k, &((fp - fm) / (2.0 * h)));
    }
    jac
}
