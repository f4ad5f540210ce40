//! Direct time integration of the full mechanical system and checks of lifted tori against it.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::{curve_diameter, curve_distance, poincare_circle, PhysicalTorus};
use crate::model::MechSystem;
use crate::trajectory::Trajectory;

/// Newmark run recorded every `record_every` steps (the final state is always kept).
pub struct NewmarkRun {
    pub traj: Trajectory,
    /// State at every multiple of the excitation period, including `t = 0`.
    pub section: Vec<DVector<f64>>,
}

/// Implicit Newmark scheme with `gamma = 1/2 + alpha`, `beta = (1 + alpha)^2 / 4` for
/// `M x'' + C x' + K x + f_nl(x, x') = eps f_ext cos(Omega t)`; `z0 = (x, x')`.
pub fn newmark_integrate(
    mech: &MechSystem,
    z0: &DVector<f64>,
    omega: f64,
    eps: f64,
    steps_per_cycle: usize,
    n_cycles: usize,
    alpha: f64,
) -> Result<Trajectory> {
    Ok(newmark_run(mech, z0, omega, eps, steps_per_cycle, n_cycles, alpha, 1)?.traj)
}

#[allow(clippy::too_many_arguments)]
pub fn newmark_run(
    mech: &MechSystem,
    z0: &DVector<f64>,
    omega: f64,
    eps: f64,
    steps_per_cycle: usize,
    n_cycles: usize,
    alpha: f64,
    record_every: usize,
) -> Result<NewmarkRun> {
    let n = mech.n();
    if z0.len() != 2 * n {
        return Err(Error::Dimension(format!("initial state must have {} entries", 2 * n)));
    }
    if !(omega > 0.0) || steps_per_cycle == 0 || record_every == 0 || !(alpha >= 0.0) {
        return Err(Error::InvalidInput("need Omega > 0, positive step counts and alpha >= 0".into()));
    }
    let gamma = 0.5 + alpha;
    let beta = (1.0 + alpha).powi(2) / 4.0;
    let h = 2.0 * PI / (steps_per_cycle as f64 * omega);
    let force = |t: f64| &mech.f_ext * (eps * (omega * t).cos());
    let stack = |x: &DVector<f64>, v: &DVector<f64>| {
        let mut z = DVector::zeros(2 * n);
        z.rows_mut(0, n).copy_from(x);
        z.rows_mut(n, n).copy_from(v);
        z
    };
    let mut x = z0.rows(0, n).into_owned();
    let mut v = z0.rows(n, n).into_owned();
    let m_lu = mech.m.clone().lu();
    let rhs0 = force(0.0) - &mech.c * &v - &mech.k * &x - mech.f_nl.eval(&stack(&x, &v));
    let mut a = m_lu.solve(&rhs0).ok_or_else(|| Error::Singular("mass matrix".into()))?;
    let total = steps_per_cycle * n_cycles;
    let mut traj = Trajectory::default();
    traj.t.push(0.0);
    traj.z.push(z0.clone());
    let mut section = vec![z0.clone()];
    let c0 = 1.0 / (beta * h * h);
    let c1 = gamma / (beta * h);
    for step in 1..=total {
        let t = step as f64 * h;
        let f = force(t);
        let mut xn = &x + &v * h + &a * (0.5 * h * h);
        let mut converged = false;
        for _ in 0..30 {
            let an = (&xn - &x - &v * h) * c0 - &a * (0.5 / beta - 1.0);
            let vn = &v + (&a * (1.0 - gamma) + &an * gamma) * h;
            let zn = stack(&xn, &vn);
            let res = &mech.m * &an + &mech.c * &vn + &mech.k * &xn + mech.f_nl.eval(&zn) - &f;
            let jn = mech.f_nl.jacobian(&zn);
            let tangent: DMatrix<f64> =
                &mech.m * c0 + (&mech.c + jn.columns(n, n)) * c1 + &mech.k + jn.columns(0, n);
            let dx = tangent.lu().solve(&res).ok_or_else(|| Error::Singular(format!("Newmark tangent at t = {t}")))?;
            xn -= &dx;
            if dx.amax() <= 1e-12 * xn.amax().max(1e-8) {
                converged = true;
                break;
            }
        }
        if !converged || !xn.iter().all(|v| v.is_finite()) {
            return Err(Error::NoConvergence(format!("Newmark Newton failed at t = {t}")));
        }
        let an = (&xn - &x - &v * h) * c0 - &a * (0.5 / beta - 1.0);
        let vn = &v + (&a * (1.0 - gamma) + &an * gamma) * h;
        x = xn;
        v = vn;
        a = an;
        if step % record_every == 0 || step == total {
            traj.t.push(t);
            traj.z.push(stack(&x, &v));
        }
        if step % steps_per_cycle == 0 {
            section.push(stack(&x, &v));
        }
    }
    Ok(NewmarkRun { traj, section })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfChoice {
    pub t_f: f64,
    pub m: u64,
    pub note: Option<String>,
}

/// Final time `M ceil(1 / rho_s) 2 pi / Omega` with `M = min(ceil(ln delta / ln |mu_max|), m_bar)`,
/// at least 1. `multipliers` are the nontrivial ones; `rho_s = omega_s / Omega`.
pub fn select_tf(rho_s: f64, multipliers: &[Complex64], delta: f64, m_bar: u64, omega: f64) -> Result<TfChoice> {
    if multipliers.is_empty() || !(rho_s > 0.0) || !(omega > 0.0) || !(delta > 0.0 && delta <= 1.0) || m_bar == 0 {
        return Err(Error::InvalidInput("select_tf needs multipliers, rho_s > 0, Omega > 0, delta in (0, 1], m_bar > 0".into()));
    }
    let lam = multipliers.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (m, note) = if lam >= 1.0 {
        (m_bar, Some(format!("unstable cycle, |mu_max| = {lam:.6}")))
    } else {
        let raw = (delta.ln() / lam.ln()).ceil();
        let m = if raw.is_finite() { (raw.max(1.0) as u64).min(m_bar) } else { 1 };
        (m, None)
    };
    let t_f = m as f64 * (1.0 / rho_s).ceil() * 2.0 * PI / omega;
    Ok(TfChoice { t_f, m, note })
}

/// `ln(max |mu|) / T_s` over the multipliers of an autonomous cycle, after
/// dropping the trivial one (nearest +1).
pub fn mle(multipliers: &[Complex64], t_s: f64) -> Result<f64> {
    if multipliers.len() < 2 || !(t_s > 0.0) {
        return Err(Error::InvalidInput("mle needs nontrivial multipliers and T_s > 0".into()));
    }
    let trivial = (0..multipliers.len())
        .min_by(|&a, &b| (multipliers[a] - 1.0).norm().total_cmp(&(multipliers[b] - 1.0).norm()))
        .unwrap();
    let lam = multipliers.iter().enumerate().filter(|(i, _)| *i != trivial).map(|(_, z)| z.norm()).fold(0.0, f64::max);
    Ok(lam.ln() / t_s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    OnTorus,
    ConvergedNearby,
    Diverged,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifySettings {
    pub steps_per_cycle: usize,
    pub alpha: f64,
    /// Fixed horizon in excitation cycles; `None` uses `select_tf`.
    pub cycles: Option<usize>,
    pub delta: f64,
    pub m_bar: u64,
    /// Use `M = 1` for slow cycles.
    pub single_window: bool,
    /// Tube radius as a fraction of the predicted circle's diameter.
    pub tube: f64,
    /// Distances up to `nearby * tube` count as converged nearby.
    pub nearby: f64,
    pub output_index: usize,
    /// Keep every `record_every`-th step in the report.
    pub record_every: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            steps_per_cycle: 1000,
            alpha: 0.005,
            cycles: None,
            delta: 1e-3,
            m_bar: 200,
            single_window: false,
            tube: 0.02,
            nearby: 5.0,
            output_index: 0,
            record_every: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimReport {
    pub trajectory: Trajectory,
    pub section: Vec<DVector<f64>>,
    pub cycles: usize,
    /// Steady window: the last `1/M` of the horizon.
    pub m: u64,
    pub steady_amplitude: f64,
    /// Section distances to the predicted circle, relative to its diameter
    /// (absolute when the circle is a single point).
    pub distance_max: f64,
    pub distance_mean: f64,
    /// Largest relative distance over the whole run, transient included.
    pub distance_max_all: f64,
    pub tube: f64,
    pub metric: String,
    pub verdict: Verdict,
}

/// Integrate the full system from the first point of `torus` and compare its
/// period-`2 pi / Omega` section with the predicted invariant circle.
pub fn verify_torus(torus: &PhysicalTorus, mech: &MechSystem, settings: &VerifySettings) -> Result<SimReport> {
    if torus.dim != 2 || torus.trajectories.is_empty() {
        return Err(Error::InvalidInput("verify_torus needs a lifted 2-torus".into()));
    }
    let omega = torus.frequencies[0];
    let omega_s = torus.frequencies[1];
    let choice = if settings.single_window || torus.multipliers.is_empty() {
        None
    } else {
        Some(select_tf(omega_s / omega, &torus.multipliers, settings.delta, settings.m_bar, omega)?)
    };
    let m = choice.as_ref().map_or(1, |c| c.m);
    let cycles = match (settings.cycles, &choice) {
        (Some(c), _) => c,
        (None, Some(c)) => (c.t_f * omega / (2.0 * PI)).round() as usize,
        (None, None) => (2.0 * PI / omega_s * omega / (2.0 * PI)).ceil() as usize,
    }
    .max(1);
    let circle = poincare_circle(torus);
    let z0 = torus.trajectories[0].z[0].clone();
    let run = newmark_run(mech, &z0, omega, torus.eps, settings.steps_per_cycle, cycles, settings.alpha, settings.record_every);
    let run = match run {
        Ok(r) => r,
        Err(Error::NoConvergence(_)) => return Ok(diverged(cycles, m, settings)),
        Err(e) => return Err(e),
    };
    let start = cycles - (cycles as f64 / m as f64).ceil().max(1.0) as usize;
    // A single-point section (periodic response) is measured in absolute terms.
    let diam = curve_diameter(&circle);
    let scale = if diam > 0.0 { diam } else { 1.0 };
    let dist: Vec<f64> = run.section.iter().map(|p| curve_distance(std::slice::from_ref(p), &circle) / scale).collect();
    let steady = &dist[start..];
    let distance_max = steady.iter().copied().fold(0.0, f64::max);
    let distance_mean = steady.iter().sum::<f64>() / steady.len() as f64;
    let distance_max_all = dist.iter().copied().fold(0.0, f64::max);
    let t_start = start as f64 * 2.0 * PI / omega;
    let steady_amplitude = run
        .traj
        .t
        .iter()
        .zip(&run.traj.z)
        .filter(|(t, _)| **t >= t_start - 1e-9)
        .map(|(_, z)| z[settings.output_index].abs())
        .fold(0.0, f64::max);
    let verdict = if !distance_max.is_finite() || distance_max > settings.nearby * settings.tube {
        Verdict::Diverged
    } else if distance_max > settings.tube {
        Verdict::ConvergedNearby
    } else {
        Verdict::OnTorus
    };
    Ok(SimReport {
        trajectory: run.traj,
        section: run.section,
        cycles,
        m,
        steady_amplitude,
        distance_max,
        distance_mean,
        distance_max_all,
        tube: settings.tube,
        metric: METRIC.into(),
        verdict,
    })
}

const METRIC: &str = "max over steady-window section points of the distance to the predicted circle polyline, over its diameter";

fn diverged(cycles: usize, m: u64, settings: &VerifySettings) -> SimReport {
    SimReport {
        trajectory: Trajectory::default(),
        section: Vec::new(),
        cycles,
        m,
        steady_amplitude: f64::INFINITY,
        distance_max: f64::INFINITY,
        distance_mean: f64::INFINITY,
        distance_max_all: f64::INFINITY,
        tube: settings.tube,
        metric: METRIC.into(),
        verdict: Verdict::Diverged,
    }
}
