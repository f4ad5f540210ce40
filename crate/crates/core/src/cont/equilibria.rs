use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{continue_branch, map_branch, Branch, BranchKind, ContinuationSettings, EventKind, ParamBound, ZeroProblem};
use crate::error::{Error, Result};
use crate::linalg::solve_real;
use crate::rom::Rom;
use crate::spectral::real_matrix_eigenvalues;

/// `(det J, prod_{i<j} (mu_i + mu_j))`.
pub fn eq_test_functions(j: &DMatrix<f64>) -> Result<(f64, f64)> {
    if j.nrows() != j.ncols() {
        return Err(Error::Dimension("test functions need a square Jacobian".into()));
    }
    let ev = real_matrix_eigenvalues(j)?;
    Ok((j.determinant(), hb_product(&ev)))
}

fn hb_product(ev: &[Complex64]) -> f64 {
    let mut p = Complex64::new(1.0, 0.0);
    for i in 0..ev.len() {
        for k in i + 1..ev.len() {
            p *= ev[i] + ev[k];
        }
    }
    p.re
}

/// If the eigenvalue pair with the smallest `|mu_i + mu_j|` is complex,
/// return its imaginary part (the Hopf frequency); neutral saddles give `None`.
pub fn is_hopf_pair(ev: &[Complex64]) -> Option<f64> {
    let scale = ev.iter().map(|e| e.norm()).fold(0.0, f64::max).max(1e-300);
    let mut best = (f64::INFINITY, 0, 0);
    for i in 0..ev.len() {
        for k in i + 1..ev.len() {
            let s = (ev[i] + ev[k]).norm();
            if s < best.0 {
                best = (s, i, k);
            }
        }
    }
    let w = ev[best.1].im.abs();
    (best.0.is_finite() && w > 1e-6 * scale).then_some(w)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EqPoint {
    pub x: Vec<f64>,
    pub omega: f64,
    pub eps: f64,
    pub stable: bool,
    pub eigenvalues: Vec<Complex64>,
    /// Period of the corresponding physical orbit, `2 pi / (r_d Omega)`.
    pub period: f64,
}

impl EqPoint {
    pub fn from_state(rom: &Rom, x: &[f64], omega: f64, eps: f64) -> Result<Self> {
        let j = rom.cartesian_jacobian(x, omega);
        let eigenvalues = real_matrix_eigenvalues(&j)?;
        let stable = eigenvalues.iter().all(|e| e.re < 0.0);
        Ok(Self {
            x: x.to_vec(),
            omega,
            eps,
            stable,
            eigenvalues,
            period: 2.0 * std::f64::consts::PI / (rom.r_d * omega),
        })
    }

    /// Modal amplitudes `rho_i = |q_i|`.
    pub fn rho(&self) -> Vec<f64> {
        self.x.chunks(2).map(|c| c[0].hypot(c[1])).collect()
    }
}

/// Equilibria of the Cartesian reduced field at fixed `eps`; unknowns `(x, Omega)`.
pub struct EquilibriumProblem<'a> {
    pub rom: &'a Rom,
    pub eps: f64,
}

impl ZeroProblem for EquilibriumProblem<'_> {
    fn n_unknowns(&self) -> usize {
        self.rom.dim_state() + 1
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.rom.dim_state();
        self.rom.cartesian_vf(&u.as_slice()[..n], u[n], self.eps)
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.rom.dim_state();
        let x = &u.as_slice()[..n];
        let mut j = DMatrix::zeros(n, n + 1);
        j.view_mut((0, 0), (n, n)).copy_from(&self.rom.cartesian_jacobian(x, u[n]));
        j.set_column(n, &self.rom.param_derivatives(x).column(0));
        j
    }

    fn event_kinds(&self) -> Vec<EventKind> {
        vec![EventKind::SN, EventKind::HB]
    }

    fn test_functions(&self, u: &DVector<f64>, _t: &DVector<f64>) -> Vec<f64> {
        let n = self.rom.dim_state();
        match eq_test_functions(&self.rom.cartesian_jacobian(&u.as_slice()[..n], u[n])) {
            Ok((a, b)) => vec![a, b],
            Err(_) => vec![f64::NAN, f64::NAN],
        }
    }

    fn confirm_event(&self, kind: EventKind, u: &DVector<f64>) -> bool {
        if kind != EventKind::HB {
            return true;
        }
        let n = self.rom.dim_state();
        real_matrix_eigenvalues(&self.rom.cartesian_jacobian(&u.as_slice()[..n], u[n]))
            .map(|ev| is_hopf_pair(&ev).is_some())
            .unwrap_or(false)
    }
}

/// Unknowns `(x, eps)` at fixed `Omega`, used to reach a target forcing level from zero.
struct EpsHomotopy<'a> {
    rom: &'a Rom,
    omega: f64,
}

impl ZeroProblem for EpsHomotopy<'_> {
    fn n_unknowns(&self) -> usize {
        self.rom.dim_state() + 1
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.rom.dim_state();
        self.rom.cartesian_vf(&u.as_slice()[..n], self.omega, u[n])
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.rom.dim_state();
        let x = &u.as_slice()[..n];
        let mut j = DMatrix::zeros(n, n + 1);
        j.view_mut((0, 0), (n, n)).copy_from(&self.rom.cartesian_jacobian(x, self.omega));
        j.set_column(n, &self.rom.param_derivatives(x).column(1));
        j
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EqOptions {
    pub settings: ContinuationSettings,
}

impl Default for EqOptions {
    fn default() -> Self {
        Self { settings: ContinuationSettings::default() }
    }
}

/// Linear predictor `x = -J(0)^{-1} eps f` at `Omega`.
fn linear_seed(rom: &Rom, omega: f64, eps: f64) -> Result<DVector<f64>> {
    let n = rom.dim_state();
    let j = rom.cartesian_jacobian(&vec![0.0; n], omega);
    let b = rom.param_derivatives(&vec![0.0; n]).column(1) * (-eps);
    solve_real(j, &b, "linearized reduced field")
}

/// Equilibrium branch over `omega_range` at fixed `eps`, traced from the lower end.
pub fn continue_equilibria(rom: &Rom, omega_range: (f64, f64), eps: f64, settings: &ContinuationSettings) -> Result<Branch<EqPoint>> {
    let (lo, hi) = omega_range;
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!("empty Omega range [{lo}, {hi}]")));
    }
    let n = rom.dim_state();
    let prob = EquilibriumProblem { rom, eps };
    let mut s = settings.clone();
    s.window = vec![ParamBound { index: n, lo, hi }];
    let mut dir = DVector::zeros(n + 1);
    dir[n] = 1.0;
    let x0 = linear_seed(rom, lo, eps)?;
    let mut seed = DVector::zeros(n + 1);
    seed.rows_mut(0, n).copy_from(&x0);
    seed[n] = lo;
    let raw = match continue_branch(&prob, seed.clone(), dir.clone(), &s) {
        Ok(raw) => raw,
        Err(Error::NoConvergence(_)) => {
            let x = homotopy_in_eps(rom, lo, eps, settings)?;
            seed.rows_mut(0, n).copy_from(&x);
            continue_branch(&prob, seed, dir, &s)?
        }
        Err(e) => return Err(e),
    };
    map_branch(raw, BranchKind::Equilibrium, &s, |p| EqPoint::from_state(rom, &p.u.as_slice()[..n], p.u[n], eps))
}

fn homotopy_in_eps(rom: &Rom, omega: f64, eps: f64, settings: &ContinuationSettings) -> Result<DVector<f64>> {
    let n = rom.dim_state();
    let prob = EpsHomotopy { rom, omega };
    let mut s = settings.clone();
    let (lo, hi) = if eps >= 0.0 { (-1e-12, eps) } else { (eps, 1e-12) };
    s.window = vec![ParamBound { index: n, lo, hi }];
    s.detect_bp = false;
    let mut dir = DVector::zeros(n + 1);
    dir[n] = eps.signum();
    let raw = continue_branch(&prob, DVector::zeros(n + 1), dir, &s)?;
    let last = raw.points.last().unwrap();
    if raw.status != super::BranchStatus::WindowExit || (last.u[n] - eps).abs() > 1e-8 * eps.abs().max(1.0) {
        return Err(Error::NoConvergence(format!("could not reach eps = {eps} at Omega = {omega}")));
    }
    Ok(last.u.rows(0, n).into_owned())
}
