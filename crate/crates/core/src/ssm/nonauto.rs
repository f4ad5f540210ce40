use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ReducedModel;
use crate::error::{Error, Result};
use crate::linalg::{bordered_solve, c, solve, to_complex_mat, CVec};
use crate::model::FirstOrderSystem;
use crate::spectral::{real_matrix_eigenvalues, Rational};
use crate::trajectory::{SampledOrbit, Trajectory};

/// Order-epsilon, p-independent part of the SSM at one forcing frequency.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonAutonomousPart {
    pub omega: f64,
    /// Reduced forcing per master mode (nonzero only for modes with `r_i = 1`).
    pub s0: Vec<Complex64>,
    pub x0: CVec,
}

/// Solve `(i Omega B - A) x0 + B V S0 = F_a` with `u_s^H B x0 = 0` on the
/// modes resonant with the forcing.
pub fn leading_nonautonomous(sys: &FirstOrderSystem, rm: &ReducedModel, omega: f64) -> Result<NonAutonomousPart> {
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!("Omega must be positive, got {omega}")));
    }
    let m = rm.m();
    let n = sys.dim();
    if sys.f_a.iter().all(|z| z.norm() == 0.0) {
        return Ok(NonAutonomousPart { omega, s0: vec![c(0.0, 0.0); m], x0: CVec::zeros(n) });
    }
    let a = to_complex_mat(&sys.a);
    let b = to_complex_mat(&sys.b);
    let op = &b * c(0.0, omega) - &a;
    let resonant: Vec<usize> = (0..m).filter(|&i| rm.master.r[i] == Rational::from(1)).collect();
    let mut s0 = vec![c(0.0, 0.0); m];
    let x0 = if resonant.is_empty() {
        solve(op.clone(), &sys.f_a, "non-autonomous equation")?
    } else {
        let cols: Vec<CVec> = resonant.iter().map(|&i| &b * &rm.master.v[i]).collect();
        let rows: Vec<CVec> = resonant.iter().map(|&i| b.adjoint() * &rm.master.u[i]).collect();
        let zeros = vec![c(0.0, 0.0); resonant.len()];
        let (x, sv) = bordered_solve(&op, &cols, &rows, &sys.f_a, &zeros, "bordered non-autonomous equation")?;
        for (&i, v) in resonant.iter().zip(sv) {
            s0[i] = v;
        }
        x
    };
    let mut res = &op * &x0 - &sys.f_a;
    for &i in &resonant {
        res += &b * &rm.master.v[i] * s0[i];
    }
    let rel = res.norm() / sys.f_a.norm();
    if !(rel < 1e-8) {
        return Err(Error::Singular(format!("non-autonomous solve residual {rel:e} at Omega = {omega}")));
    }
    Ok(NonAutonomousPart { omega, s0, x0 })
}

/// Steady response of the linearization, `z(t) = -2 eps Re((A - i Omega B)^{-1} F_a e^{i Omega t})`,
/// sampled at `n_pt` points over one period.
pub fn linear_response(sys: &FirstOrderSystem, omega: f64, eps: f64, n_pt: usize, sep_tol: f64) -> Result<SampledOrbit> {
    if !(omega > 0.0) || n_pt == 0 {
        return Err(Error::InvalidInput("Omega must be positive and n_pt nonzero".into()));
    }
    let ev = real_matrix_eigenvalues(&(sys.b_inv() * &sys.a))?;
    if let Some(l) = ev.iter().find(|l| l.im > 0.0 && (l.im - omega).abs() <= sep_tol * omega) {
        return Err(Error::Resonance(format!("Omega = {omega} is within tolerance of natural frequency {}", l.im)));
    }
    let op = to_complex_mat(&sys.a) - to_complex_mat(&sys.b) * c(0.0, omega);
    let x = solve(op, &sys.f_a, "linear response")?;
    let period = 2.0 * std::f64::consts::PI / omega;
    let mut traj = Trajectory::default();
    for s in 0..n_pt {
        let t = period * s as f64 / n_pt as f64;
        let e = Complex64::from_polar(1.0, omega * t);
        traj.t.push(t);
        traj.z.push(DVector::from_iterator(x.len(), x.iter().map(|xi| -2.0 * eps * (xi * e).re)));
    }
    Ok(SampledOrbit { period, traj })
}
