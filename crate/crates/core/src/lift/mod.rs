//! Reduced-model objects mapped back to physical coordinates.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CVec};
use crate::model::FirstOrderSystem;
use crate::po::PoSolution;
use crate::rom::Rom;
use crate::ssm::{leading_nonautonomous, ReducedModel};
use crate::tor2::{rk4_flow, TorusSolution};
use crate::trajectory::{SampledOrbit, Trajectory};

/// Default samples per excitation period.
pub const N_PT: usize = 128;
/// Default samples per excitation period for 3-tori.
pub const N_T: usize = 10;
/// Cycles below this size are lifted as periodic orbits.
const DEGENERATE_SIZE: f64 = 1e-12;

/// Lifting map at one forcing frequency: `z = W(p) + eps (x0 e^{i phi} + c.c.)`.
pub struct Lift<'a> {
    rm: &'a ReducedModel,
    r: Vec<f64>,
    x0: CVec,
    pub omega: f64,
}

impl<'a> Lift<'a> {
    /// Uses the cached non-autonomous solution at `omega` or solves for it.
    pub fn new(sys: &FirstOrderSystem, rm: &'a ReducedModel, omega: f64) -> Result<Self> {
        let x0 = match rm.nonauto_at(omega) {
            Some(part) => part.x0.clone(),
            None => leading_nonautonomous(sys, rm, omega)?.x0,
        };
        if x0.len() != rm.w[0].len() {
            return Err(Error::Dimension("system and reduced model disagree in size".into()));
        }
        Ok(Self { rm, r: rm.master.r_f64(), x0, omega })
    }

    /// Physical state from rotating-frame Cartesian coordinates `xy` at forcing phase `phi`.
    pub fn point(&self, xy: &[f64], phi: f64, eps: f64) -> DVector<f64> {
        self.complex_point(xy, phi, eps).map(|z| z.re)
    }

    fn complex_point(&self, xy: &[f64], phi: f64, eps: f64) -> CVec {
        let m = self.rm.m();
        let q: Vec<Complex64> =
            (0..m).map(|i| c(xy[2 * i], xy[2 * i + 1]) * Complex64::from_polar(1.0, self.r[i] * phi)).collect();
        let p: Vec<Complex64> = q.iter().copied().chain(q.iter().map(|z| z.conj())).collect();
        let e = Complex64::from_polar(1.0, phi);
        let forced = self.x0.map(|x| x * e);
        self.rm.eval_w(&p) + (&forced + forced.map(|z| z.conj())) * c(eps, 0.0)
    }

    /// Largest imaginary residue of the lifted state (should vanish).
    pub fn imaginary_residue(&self, xy: &[f64], phi: f64, eps: f64) -> f64 {
        self.complex_point(xy, phi, eps).iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

/// One-shot version of [`Lift::point`].
pub fn lift_point(sys: &FirstOrderSystem, rm: &ReducedModel, xy: &[f64], phi: f64, omega: f64, eps: f64) -> Result<DVector<f64>> {
    Ok(Lift::new(sys, rm, omega)?.point(xy, phi, eps))
}

/// Periodic orbit of the full system from a reduced equilibrium `xy` at `(omega, eps)`,
/// sampled at `n_pt` points over `2 pi / (r_d Omega)`.
pub fn eq_to_po(sys: &FirstOrderSystem, rm: &ReducedModel, xy: &[f64], omega: f64, eps: f64, n_pt: usize) -> Result<SampledOrbit> {
    if n_pt == 0 || !(omega > 0.0) {
        return Err(Error::InvalidInput("n_pt must be positive and Omega > 0".into()));
    }
    let lift = Lift::new(sys, rm, omega)?;
    let period = 2.0 * PI / (rm.master.r_d_f64() * omega);
    let t: Vec<f64> = (0..n_pt).map(|k| period * k as f64 / n_pt as f64).collect();
    let z = t.iter().map(|&t| lift.point(xy, omega * t, eps)).collect();
    Ok(SampledOrbit { period, traj: Trajectory { t, z } })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhysicalTorus {
    /// 2 or 3.
    pub dim: usize,
    pub trajectories: Vec<Trajectory>,
    /// `(Omega, omega_s)` or `(Omega, omega_1s, omega_2s)`.
    pub frequencies: Vec<f64>,
    pub eps: f64,
    pub stable: Option<bool>,
    /// Nontrivial Floquet multipliers of the reduced cycle, when lifted from one.
    pub multipliers: Vec<Complex64>,
    pub warnings: Vec<String>,
}

/// 2-torus from a reduced limit cycle: trajectories started at every mesh time
/// of the cycle, each over one excitation period.
pub fn po_to_torus2(sys: &FirstOrderSystem, rm: &ReducedModel, po: &PoSolution, n_pt: usize) -> Result<PhysicalTorus> {
    let (omega, eps) = params(&po.params)?;
    if n_pt == 0 {
        return Err(Error::InvalidInput("n_pt must be positive".into()));
    }
    let lift = Lift::new(sys, rm, omega)?;
    let t_exc = 2.0 * PI / omega;
    let t: Vec<f64> = (0..n_pt).map(|k| t_exc * k as f64 / n_pt as f64).collect();
    let shifts: Vec<f64> = if po.size < DEGENERATE_SIZE { vec![0.0] } else { po.tau() };
    let trajectories = shifts
        .par_iter()
        .map(|&sigma| {
            let z = t.iter().map(|&tk| lift.point(po.eval(sigma + tk / po.period).as_slice(), omega * tk, eps)).collect();
            Trajectory { t: t.clone(), z }
        })
        .collect();
    Ok(PhysicalTorus { dim: 2, trajectories, frequencies: vec![omega, po.omega()], eps, stable: Some(po.stable), multipliers: po.nontrivial_multipliers(), warnings: Vec::new() })
}

/// Lifted points of the cycle at `n` equispaced slow phases, all at forcing phase zero.
pub fn po_section(sys: &FirstOrderSystem, rm: &ReducedModel, po: &PoSolution, n: usize) -> Result<Vec<DVector<f64>>> {
    let (omega, eps) = params(&po.params)?;
    let lift = Lift::new(sys, rm, omega)?;
    Ok((0..n).map(|j| lift.point(po.eval(j as f64 / n as f64).as_slice(), 0.0, eps)).collect())
}

/// 3-torus from a reduced 2-torus: every segment is followed for
/// `ceil(T_2 / T)` excitation periods and sampled `n_t` times per period.
pub fn torus2_to_torus3(sys: &FirstOrderSystem, rm: &ReducedModel, tor: &TorusSolution, n_t: usize) -> Result<PhysicalTorus> {
    let (omega, eps) = params(&tor.params)?;
    if n_t == 0 || !tor.autonomous {
        return Err(Error::InvalidInput("need n_t > 0 and a reduced-model torus".into()));
    }
    let rom = Rom::new(rm);
    let lift = Lift::new(sys, rm, omega)?;
    let t_exc = 2.0 * PI / omega;
    let ratio = tor.t2 / t_exc;
    let mut warnings = Vec::new();
    if ratio < 2.0 {
        warnings.push(format!("T_2 / T = {ratio:.3} is below 2; time scales are not separated"));
    }
    let count = ratio.ceil() as usize * n_t;
    let dt = t_exc / n_t as f64;
    // Sub-steps per sample sized from the torus's own step length.
    let sub = ((dt / (tor.t2 / tor.steps as f64)).ceil() as usize).max(1);
    let trajectories = tor
        .points
        .par_iter()
        .map(|u0| {
            let mut x = DVector::from_column_slice(u0);
            let mut t = Vec::with_capacity(count + 1);
            let mut z = Vec::with_capacity(count + 1);
            for k in 0..=count {
                if k > 0 {
                    x = rk4_flow(&rom, 0.0, &x, dt, sub, &tor.params, false, &[]).x;
                }
                let tk = k as f64 * dt;
                t.push(tk);
                z.push(lift.point(x.as_slice(), omega * tk, eps));
            }
            Trajectory { t, z }
        })
        .collect();
    Ok(PhysicalTorus { dim: 3, trajectories, frequencies: vec![omega, tor.omega1(), tor.omega2()], eps, stable: None, multipliers: Vec::new(), warnings })
}

fn params(p: &[f64]) -> Result<(f64, f64)> {
    match p {
        [omega, eps] if *omega > 0.0 => Ok((*omega, *eps)),
        _ => Err(Error::InvalidInput("expected parameters [Omega, eps] with Omega > 0".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationKind {
    /// `rho = m1 / m_p`; the lifted motion repeats after `m_p` excitation periods.
    Periodic { m1: i64, m_p: u64 },
    Quasiperiodic,
}

/// Absolute tolerance on `rho` for accepting a rational approximation.
pub const ROTATION_TOL: f64 = 1e-6;

/// `rho = omega_s / (r_d Omega)` with `omega_s = 2 pi / T_s`, tested against
/// continued-fraction convergents with denominators up to `cap`.
pub fn classify_rotation(t_s: f64, omega: f64, r_d: f64, cap: u64) -> (f64, RotationKind) {
    let rho = 2.0 * PI / t_s / (r_d * omega);
    (rho, rational_kind(rho, cap))
}

fn rational_kind(rho: f64, cap: u64) -> RotationKind {
    if !rho.is_finite() {
        return RotationKind::Quasiperiodic;
    }
    // Convergents h/k of the continued fraction of rho.
    let (mut h0, mut h1) = (1i64, rho.floor() as i64);
    let (mut k0, mut k1) = (0i64, 1i64);
    let mut frac = rho - rho.floor();
    loop {
        if k1 as u64 > cap {
            return RotationKind::Quasiperiodic;
        }
        if (rho - h1 as f64 / k1 as f64).abs() <= ROTATION_TOL {
            return RotationKind::Periodic { m1: h1, m_p: k1 as u64 };
        }
        if frac < 1e-15 {
            return RotationKind::Quasiperiodic;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let a = a as i64;
        (h0, h1) = (h1, a.saturating_mul(h1).saturating_add(h0));
        (k0, k1) = (k1, a.saturating_mul(k1).saturating_add(k0));
    }
}

/// Max of `|z[idx]|` over every sample of every trajectory.
pub fn amplitude_inf(trajectories: &[Trajectory], idx: usize) -> f64 {
    trajectories.iter().map(|t| t.amplitude(idx)).fold(0.0, f64::max)
}

/// Samples at times that are multiples of the excitation period, in trajectory order
/// (which follows the slow phase for lifted tori).
pub fn poincare_circle(tor: &PhysicalTorus) -> Vec<DVector<f64>> {
    let t_exc = 2.0 * PI / tor.frequencies[0];
    let mut out = Vec::new();
    for tr in &tor.trajectories {
        for (t, z) in tr.t.iter().zip(&tr.z) {
            let k = (t / t_exc).round();
            if (t - k * t_exc).abs() <= 1e-9 * t_exc.max(1.0) {
                out.push(z.clone());
            }
        }
    }
    out
}

/// Largest distance from `points` to the closed polyline through `curve`.
pub fn curve_distance(points: &[DVector<f64>], curve: &[DVector<f64>]) -> f64 {
    let n = curve.len();
    let dist = |p: &DVector<f64>| {
        (0..n)
            .map(|i| {
                let a = &curve[i];
                let b = &curve[(i + 1) % n];
                let d = b - a;
                let s = if d.norm_squared() > 0.0 { ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
                (p - a - d * s).norm()
            })
            .fold(f64::INFINITY, f64::min)
    };
    points.iter().map(dist).fold(0.0, f64::max)
}

/// Largest pairwise distance between curve samples.
pub fn curve_diameter(curve: &[DVector<f64>]) -> f64 {
    let mut diam: f64 = 0.0;
    for (i, a) in curve.iter().enumerate() {
        for b in &curve[i + 1..] {
            diam = diam.max((a - b).norm());
        }
    }
    diam
}
