//! Periodic orbits by collocation: Newton solves, Floquet multipliers,
//! test functions, Hopf switching and continuation.

mod colloc;

use std::f64::consts::PI;
use std::sync::RwLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use colloc::{gauss_legendre, Mesh};
use colloc::Basis;

use crate::cont::{continue_branch, map_branch, Branch, BranchKind, ContinuationSettings, EventKind, ParamBound, ZeroProblem};
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::interp::PeriodicSpline;
use crate::spectral::real_matrix_eigenvalues;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoSolution {
    pub mesh: Mesh,
    /// States at the base points `tau_k = k / n_points`.
    pub x: Vec<Vec<f64>>,
    pub period: f64,
    pub params: Vec<f64>,
    pub multipliers: Vec<Complex64>,
    pub stable: bool,
    pub size: f64,
    pub mean: Vec<f64>,
    pub autonomous: bool,
}

impl PoSolution {
    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    /// `2 pi / T`.
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn tau(&self) -> Vec<f64> {
        self.mesh.tau()
    }

    fn flat(&self) -> Vec<f64> {
        self.x.iter().flatten().copied().collect()
    }

    /// State at normalized time `tau` (mod 1) from the collocation polynomial.
    pub fn eval(&self, tau: f64) -> DVector<f64> {
        Basis::new(self.mesh).eval(&self.flat(), self.dim(), tau)
    }

    /// Multipliers with the trivial one removed for autonomous orbits.
    pub fn nontrivial_multipliers(&self) -> Vec<Complex64> {
        if self.autonomous {
            remove_trivial(&self.multipliers)
        } else {
            self.multipliers.clone()
        }
    }
}

fn remove_trivial(mu: &[Complex64]) -> Vec<Complex64> {
    let mut v = mu.to_vec();
    if let Some(k) = (0..v.len()).min_by(|&a, &b| (v[a] - 1.0).norm().total_cmp(&(v[b] - 1.0).norm())) {
        v.remove(k);
    }
    v
}

/// `(psi_SN, psi_PD, psi_TR)` from Floquet multipliers. Autonomous orbits drop
/// the multiplier nearest +1 first; `n_b > 0` keeps only the `n_b`
/// multipliers nearest the unit circle.
pub fn po_test_functions(multipliers: &[Complex64], autonomous: bool, n_b: usize) -> Result<(f64, f64, f64)> {
    if multipliers.is_empty() {
        return Err(Error::InvalidInput("no multipliers".into()));
    }
    let mut mu = if autonomous { remove_trivial(multipliers) } else { multipliers.to_vec() };
    if n_b > 0 {
        if n_b > mu.len() {
            return Err(Error::InvalidInput(format!("n_b = {n_b} exceeds the {} available multipliers", mu.len())));
        }
        mu.sort_by(|a, b| (a.norm() - 1.0).abs().total_cmp(&(b.norm() - 1.0).abs()));
        mu.truncate(n_b);
    }
    let one = Complex64::new(1.0, 0.0);
    let sn = mu.iter().fold(one, |p, &l| p * (l - 1.0));
    let pd = mu.iter().fold(one, |p, &l| p * (l + 1.0));
    let mut tr = one;
    for i in 0..mu.len() {
        for j in 0..i {
            tr *= mu[i] * mu[j] - 1.0;
        }
    }
    Ok((sn.re, pd.re, tr.re))
}

/// True if the pair of multipliers with product closest to 1 is a complex pair (not a neutral saddle).
fn is_torus_pair(mu: &[Complex64]) -> bool {
    let mut best = (f64::INFINITY, 0);
    for i in 0..mu.len() {
        for j in 0..i {
            let d = (mu[i] * mu[j] - 1.0).norm();
            if d < best.0 {
                best = (d, i);
            }
        }
    }
    best.0.is_finite() && mu[best.1].im.abs() > 1e-6 * mu[best.1].norm()
}

/// Starting data for a collocation solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoSeed {
    pub mesh: Mesh,
    /// States at `mesh.tau()`.
    pub x: Vec<DVector<f64>>,
    pub period: f64,
    pub params: Vec<f64>,
    /// Initial continuation direction in unknown space, if known.
    pub direction: Option<Vec<f64>>,
}

impl PoSeed {
    /// Sample `f(tau)` on the mesh.
    pub fn from_fn(mesh: Mesh, period: f64, params: Vec<f64>, f: impl Fn(f64) -> DVector<f64>) -> Self {
        let x = mesh.tau().into_iter().map(f).collect();
        Self { mesh, x, period, params, direction: None }
    }

    /// Resample states given at uniform `tau_k = k / len` with a periodic spline.
    pub fn from_samples(mesh: Mesh, period: f64, params: Vec<f64>, samples: &[DVector<f64>]) -> Result<Self> {
        let n = samples.len();
        let knots: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
        let sp = PeriodicSpline::new(&knots, samples, 1.0)?;
        Ok(Self::from_fn(mesh, period, params, |t| sp.eval(t)))
    }

    pub fn from_solution(po: &PoSolution) -> Self {
        Self {
            mesh: po.mesh,
            x: po.x.iter().map(|v| DVector::from_column_slice(v)).collect(),
            period: po.period,
            params: po.params.clone(),
            direction: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoOptions {
    pub settings: ContinuationSettings,
    /// Multipliers used by the test functions; 0 = all.
    pub n_b: usize,
    /// Stop when the orbit size drops below this.
    pub min_size: f64,
    /// Hopf-switch amplitude relative to `max(|x_HB|, 1)`.
    pub hopf_delta: f64,
}

impl Default for PoOptions {
    fn default() -> Self {
        Self {
            settings: ContinuationSettings { h0: 1e-3, h_max: 0.05, ..Default::default() },
            n_b: 0,
            min_size: 1e-6,
            hopf_delta: 1e-3,
        }
    }
}

/// Collocation equations with the period (autonomous fields) and one
/// parameter as extra unknowns. Layout: base-point states, `T` if autonomous, `p[free]`.
pub struct PoProblem<'a, D: Dynamics> {
    field: &'a D,
    basis: Basis,
    params: Vec<f64>,
    free: usize,
    n_b: usize,
    min_size: f64,
    weights: DVector<f64>,
    phase: RwLock<DVector<f64>>,
    max_size: RwLock<f64>,
}

impl<'a, D: Dynamics> PoProblem<'a, D> {
    pub fn new(field: &'a D, seed: &PoSeed, free: usize, n_b: usize, min_size: f64) -> Result<Self> {
        let n = field.dim();
        if seed.x.len() != seed.mesh.n_points() || seed.x.iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("seed does not match the mesh and field dimension".into()));
        }
        if seed.params.len() != field.n_params() || free >= field.n_params() {
            return Err(Error::Dimension("parameter vector or free index out of range".into()));
        }
        if !field.is_autonomous() && field.forcing_frequency(&seed.params).is_none() {
            return Err(Error::InvalidInput("non-autonomous field without a forcing frequency".into()));
        }
        let basis = Basis::new(seed.mesh);
        let np = seed.mesh.n_points();
        let mut weights = DVector::from_element(np * n + 1 + field.is_autonomous() as usize, 1.0 / np as f64);
        let last = weights.len() - 1;
        weights[last] = 1.0;
        if field.is_autonomous() {
            weights[np * n] = 1.0 / (seed.period * seed.period);
        }
        let prob = Self {
            field,
            basis,
            params: seed.params.clone(),
            free,
            n_b,
            min_size,
            weights,
            phase: RwLock::new(DVector::zeros(np * n)),
            max_size: RwLock::new(0.0),
        };
        let x: Vec<f64> = seed.x.iter().flat_map(|v| v.iter().copied()).collect();
        prob.set_reference(&x);
        Ok(prob)
    }

    fn nx(&self) -> usize {
        self.basis.mesh.n_points() * self.field.dim()
    }

    pub fn pack(&self, seed: &PoSeed) -> DVector<f64> {
        let nx = self.nx();
        let mut u = DVector::zeros(self.n_unknowns());
        for (k, v) in seed.x.iter().enumerate() {
            u.rows_mut(k * v.len(), v.len()).copy_from(v);
        }
        if self.field.is_autonomous() {
            u[nx] = seed.period;
        }
        let last = u.len() - 1;
        u[last] = seed.params[self.free];
        u
    }

    fn params_of(&self, u: &DVector<f64>) -> Vec<f64> {
        let mut p = self.params.clone();
        p[self.free] = u[u.len() - 1];
        p
    }

    fn period_of(&self, u: &DVector<f64>, p: &[f64]) -> f64 {
        if self.field.is_autonomous() {
            u[self.nx()]
        } else {
            2.0 * PI / self.field.forcing_frequency(p).unwrap()
        }
    }

    /// Integral phase condition `int <x, x_ref'> dtau = 0` against `x_ref`.
    fn set_reference(&self, xref: &[f64]) {
        let b = &self.basis;
        let n = self.field.dim();
        let ni = b.mesh.intervals;
        let mut row = DVector::zeros(self.nx());
        for i in 0..ni {
            for (g, &w) in b.qw.iter().enumerate() {
                let dref = b.combine(xref, n, i, b.lqd.row(g).transpose().as_slice()) * ni as f64;
                for k in 0..=b.mesh.degree {
                    let p = b.point(i, k);
                    let c = w / ni as f64 * b.lq[(g, k)];
                    let mut seg = row.rows_mut(p * n, n);
                    seg += &dref * c;
                }
            }
        }
        let nrm = row.norm();
        if nrm > 0.0 {
            row /= nrm;
        }
        *self.phase.write().unwrap() = row;
    }

    fn solution(&self, u: &DVector<f64>) -> Result<PoSolution> {
        let n = self.field.dim();
        let p = self.params_of(u);
        let period = self.period_of(u, &p);
        let x = &u.as_slice()[..self.nx()];
        let multipliers = floquet_raw(&self.basis, self.field, x, period, &p)?;
        let (mean, size) = colloc::mean_and_size(&self.basis, x, n);
        let auto = self.field.is_autonomous();
        let nontriv = if auto { remove_trivial(&multipliers) } else { multipliers.clone() };
        Ok(PoSolution {
            mesh: self.basis.mesh,
            x: x.chunks(n).map(|c| c.to_vec()).collect(),
            period,
            params: p,
            stable: nontriv.iter().all(|m| m.norm() < 1.0),
            multipliers,
            size,
            mean: mean.as_slice().to_vec(),
            autonomous: auto,
        })
    }

    fn size_of(&self, u: &DVector<f64>) -> f64 {
        colloc::mean_and_size(&self.basis, &u.as_slice()[..self.nx()], self.field.dim()).1
    }

    fn square_residual(&self, x: &[f64], period: f64, p: &[f64]) -> DVector<f64> {
        let r = colloc::residual(&self.basis, self.field, x, period, p);
        if self.field.is_autonomous() {
            let ph = self.phase.read().unwrap().dot(&DVector::from_column_slice(x));
            let mut out = DVector::zeros(r.len() + 1);
            out.rows_mut(0, r.len()).copy_from(&r);
            out[r.len()] = ph;
            out
        } else {
            r
        }
    }

    /// Jacobian with respect to states and (autonomous) period.
    fn square_jacobian(&self, x: &[f64], period: f64, p: &[f64]) -> DMatrix<f64> {
        let nx = self.nx();
        let (jx, dt) = colloc::jacobian(&self.basis, self.field, x, period, p);
        if !self.field.is_autonomous() {
            return jx;
        }
        let mut j = DMatrix::zeros(nx + 1, nx + 1);
        j.view_mut((0, 0), (nx, nx)).copy_from(&jx);
        j.view_mut((0, nx), (nx, 1)).copy_from(&dt);
        let ph = self.phase.read().unwrap();
        for k in 0..nx {
            j[(nx, k)] = ph[k];
        }
        j
    }
}

fn floquet_raw<D: Dynamics>(b: &Basis, f: &D, x: &[f64], period: f64, p: &[f64]) -> Result<Vec<Complex64>> {
    let m = colloc::monodromy(b, f, x, period, p).ok_or_else(|| Error::Singular("ill-conditioned monodromy".into()))?;
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular("ill-conditioned monodromy".into()));
    }
    real_matrix_eigenvalues(&m)
}

impl<D: Dynamics> ZeroProblem for PoProblem<'_, D> {
    fn n_unknowns(&self) -> usize {
        self.nx() + 1 + self.field.is_autonomous() as usize
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let p = self.params_of(u);
        let period = self.period_of(u, &p);
        self.square_residual(&u.as_slice()[..self.nx()], period, &p)
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let nu = self.n_unknowns();
        let p = self.params_of(u);
        let period = self.period_of(u, &p);
        let x = &u.as_slice()[..self.nx()];
        let sq = self.square_jacobian(x, period, &p);
        let mut j = DMatrix::zeros(nu - 1, nu);
        j.view_mut((0, 0), (nu - 1, nu - 1)).copy_from(&sq);
        let h = 1e-7 * (1.0 + u[nu - 1].abs());
        let mut up = u.clone();
        up[nu - 1] += h;
        let mut um = u.clone();
        um[nu - 1] -= h;
        j.set_column(nu - 1, &((self.residual(&up) - self.residual(&um)) / (2.0 * h)));
        j
    }

    fn weights(&self) -> DVector<f64> {
        self.weights.clone()
    }

    fn event_kinds(&self) -> Vec<EventKind> {
        vec![EventKind::SN, EventKind::PD, EventKind::TR]
    }

    fn test_functions(&self, u: &DVector<f64>, _t: &DVector<f64>) -> Vec<f64> {
        let p = self.params_of(u);
        let period = self.period_of(u, &p);
        floquet_raw(&self.basis, self.field, &u.as_slice()[..self.nx()], period, &p)
            .and_then(|mu| po_test_functions(&mu, self.field.is_autonomous(), self.n_b))
            .map(|(a, b, c)| vec![a, b, c])
            .unwrap_or_else(|_| vec![f64::NAN; 3])
    }

    fn confirm_event(&self, kind: EventKind, u: &DVector<f64>) -> bool {
        if kind != EventKind::TR {
            return true;
        }
        let p = self.params_of(u);
        let period = self.period_of(u, &p);
        match floquet_raw(&self.basis, self.field, &u.as_slice()[..self.nx()], period, &p) {
            Ok(mu) => is_torus_pair(&if self.field.is_autonomous() { remove_trivial(&mu) } else { mu }),
            Err(_) => false,
        }
    }

    fn terminate(&self, u: &DVector<f64>) -> bool {
        self.size_of(u) < self.min_size
    }

    fn accept(&self, u: &DVector<f64>) {
        self.set_reference(&u.as_slice()[..self.nx()]);
        let size = self.size_of(u);
        let mut m = self.max_size.write().unwrap();
        *m = m.max(size);
    }

    /// A branch point on a family that has shrunk to a small fraction of its
    /// largest size is the Hopf point where the cycles collapse.
    fn stop_at_event(&self, kind: EventKind, u: &DVector<f64>) -> bool {
        kind == EventKind::BP && self.size_of(u) < 0.05 * *self.max_size.read().unwrap()
    }
}

/// Newton solve at fixed parameters.
pub fn collocate_po<D: Dynamics>(field: &D, seed: &PoSeed) -> Result<PoSolution> {
    let prob = PoProblem::new(field, seed, 0, 0, 0.0)?;
    let nx = prob.nx();
    let auto = field.is_autonomous();
    let p = seed.params.clone();
    let mut x: Vec<f64> = seed.x.iter().flat_map(|v| v.iter().copied()).collect();
    let mut period = if auto { seed.period } else { prob.period_of(&DVector::zeros(1), &p) };
    for _ in 0..40 {
        let r = prob.square_residual(&x, period, &p);
        let j = prob.square_jacobian(&x, period, &p);
        // Minimum-norm steps also handle families of orbits (e.g. linear centers).
        let dx = j.svd(true, true).solve(&(-&r), 1e-13).map_err(|e| Error::Singular(format!("collocation Jacobian: {e}")))?;
        for k in 0..nx {
            x[k] += dx[k];
        }
        if auto {
            period += dx[nx];
        }
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dx.amax() < 1e-11 * scale && prob.square_residual(&x, period, &p).amax() < 1e-9 * scale {
            let mut u = DVector::zeros(prob.n_unknowns());
            u.rows_mut(0, nx).copy_from_slice(&x);
            if auto {
                u[nx] = period;
            }
            let last = u.len() - 1;
            u[last] = p[0];
            let sol = prob.solution(&u)?;
            if auto && sol.size < 1e-9 {
                return Err(Error::NoConvergence("collocation converged to a degenerate (constant) orbit".into()));
            }
            return Ok(sol);
        }
        if !(period > 0.0) || x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::NoConvergence("collocation Newton iteration diverged".into()))
}

/// Floquet multipliers of a converged orbit.
pub fn floquet<D: Dynamics>(po: &PoSolution, field: &D) -> Result<Vec<Complex64>> {
    floquet_raw(&Basis::new(po.mesh), field, &po.flat(), po.period, &po.params)
}

/// `sqrt((1/T) int |x - mean|^2 dt)`.
pub fn po_size(po: &PoSolution) -> f64 {
    colloc::mean_and_size(&Basis::new(po.mesh), &po.flat(), po.dim()).1
}

/// Seed orbit `x_HB + delta Re(w e^{2 pi i tau})` at a Hopf equilibrium of an autonomous field.
pub fn hb_switch<D: Dynamics>(field: &D, x_hb: &[f64], params: &[f64], delta: f64, mesh: Mesh) -> Result<PoSeed> {
    let n = field.dim();
    let x0 = DVector::from_column_slice(x_hb);
    let j = field.jac_x(0.0, &x0, params);
    let ev = real_matrix_eigenvalues(&j)?;
    let w_s = crate::cont::is_hopf_pair(&ev).ok_or_else(|| Error::InvalidInput("no complex critical pair at the Hopf point".into()))?;
    let shifted = j.map(|v| Complex64::new(v, 0.0)) - DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, w_s);
    let svd = shifted.svd(false, true);
    let sv = &svd.singular_values;
    if n > 1 && sv[n - 2] < 1e-8 * sv[0].max(1e-300) {
        return Err(Error::Singular("defective crossing pair".into()));
    }
    let vt = svd.v_t.ok_or_else(|| Error::Eigen("SVD failed".into()))?;
    let w: DVector<Complex64> = vt.row(n - 1).transpose().map(|z| z.conj());
    let w = &w / Complex64::new(w.norm(), 0.0);
    let d = delta * x0.norm().max(1.0);
    let mut seed = PoSeed::from_fn(mesh, 2.0 * PI / w_s, params.to_vec(), |tau| {
        let e = Complex64::from_polar(1.0, 2.0 * PI * tau);
        &x0 + w.map(|z| (z * e).re) * d
    });
    // Grow the amplitude first.
    let mut dir: Vec<f64> = seed.x.iter().flat_map(|v| (v - &x0).iter().copied().collect::<Vec<_>>()).collect();
    dir.extend([0.0, 0.0]);
    seed.direction = Some(dir);
    Ok(seed)
}

/// Continue a periodic-orbit family in parameter `free` over `range`.
pub fn continue_po<D: Dynamics>(field: &D, seed: &PoSeed, free: usize, range: (f64, f64), opts: &PoOptions) -> Result<Branch<PoSolution>> {
    let prob = PoProblem::new(field, seed, free, opts.n_b, opts.min_size)?;
    let u0 = prob.pack(seed);
    let nu = u0.len();
    let mut s = opts.settings.clone();
    s.window = vec![ParamBound { index: nu - 1, lo: range.0, hi: range.1 }];
    let dir = match &seed.direction {
        Some(d) if d.len() == nu => DVector::from_column_slice(d),
        Some(_) => return Err(Error::Dimension("seed direction has the wrong length".into())),
        None => {
            let mut d = DVector::zeros(nu);
            d[nu - 1] = 1.0;
            d
        }
    };
    let raw = continue_branch(&prob, u0, dir, &s)?;
    map_branch(raw, BranchKind::PeriodicOrbit, &s, |p| prob.solution(&p.u))
}

#[cfg(test)]
mod tests;
