//! Two-dimensional invariant tori by multiple shooting: `2 n_h + 1` trajectories
//! start on a closed curve and must land on the same curve rotated by `2 pi rho`.

use std::f64::consts::PI;
use std::sync::RwLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cont::{continue_branch, map_branch, Branch, BranchKind, ContinuationSettings, ParamBound, ZeroProblem};
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::po::PoSolution;

/// Trigonometric interpolation kernel `(1/N) sum_{|k|<=n_h} e^{i k x}` and its derivative.
fn dirichlet(n_h: usize, x: f64) -> (f64, f64) {
    let n = (2 * n_h + 1) as f64;
    let mut d = 1.0;
    let mut dd = 0.0;
    for k in 1..=n_h {
        let kf = k as f64;
        d += 2.0 * (kf * x).cos();
        dd -= 2.0 * kf * (kf * x).sin();
    }
    (d / n, dd / n)
}

fn harmonics(n_pts: usize) -> Result<usize> {
    if n_pts == 0 || n_pts % 2 == 0 {
        return Err(Error::InvalidInput(format!("torus curves need an odd number of points, got {n_pts}")));
    }
    Ok((n_pts - 1) / 2)
}

/// `R_ij(rho)`: the interpolant through points at `theta_j = 2 pi j / N`,
/// evaluated at `theta_i + 2 pi rho`. Second matrix is `dR/drho`.
pub fn rotation_matrix(n_pts: usize, rho: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n_h = harmonics(n_pts)?;
    let mut r = DMatrix::zeros(n_pts, n_pts);
    let mut dr = DMatrix::zeros(n_pts, n_pts);
    for i in 0..n_pts {
        for j in 0..n_pts {
            let x = 2.0 * PI * ((i as f64 - j as f64) / n_pts as f64 + rho);
            let (d, dd) = dirichlet(n_h, x);
            r[(i, j)] = d;
            dr[(i, j)] = 2.0 * PI * dd;
        }
    }
    Ok((r, dr))
}

/// Spectral `d/dtheta` on the curve nodes.
fn theta_derivative(n_pts: usize) -> DMatrix<f64> {
    let n_h = (n_pts - 1) / 2;
    DMatrix::from_fn(n_pts, n_pts, |i, j| dirichlet(n_h, 2.0 * PI * (i as f64 - j as f64) / n_pts as f64).1)
}

/// Rigid rotation of a closed curve given by `2 n_h + 1` equispaced samples.
pub fn rotation_operator(points: &[DVector<f64>], rho: f64) -> Result<Vec<DVector<f64>>> {
    let (r, _) = rotation_matrix(points.len(), rho)?;
    Ok(apply_rows(&r, points))
}

fn apply_rows(r: &DMatrix<f64>, points: &[DVector<f64>]) -> Vec<DVector<f64>> {
    (0..r.nrows())
        .map(|i| {
            let mut acc = DVector::zeros(points[0].len());
            for (j, p) in points.iter().enumerate() {
                acc.axpy(r[(i, j)], p, 1.0);
            }
            acc
        })
        .collect()
}

/// End state of an RK4 run, with the state transition matrix and the
/// sensitivities to the selected parameters when requested.
pub struct Flow {
    pub x: DVector<f64>,
    pub phi: Option<DMatrix<f64>>,
    pub dp: Option<DMatrix<f64>>,
    /// Derivative of the end state with respect to `duration` (steps fixed).
    pub dt: Option<DVector<f64>>,
}

/// Classical RK4 over `[t0, t0 + duration]` in `steps` steps.
pub fn rk4_flow<D: Dynamics>(
    field: &D,
    t0: f64,
    x0: &DVector<f64>,
    duration: f64,
    steps: usize,
    p: &[f64],
    variational: bool,
    sens: &[usize],
) -> Flow {
    let n = field.dim();
    let h = duration / steps as f64;
    let ns = sens.len();
    // Augmented state: x, then Phi (n x n), then S (n x ns), column-major, then
    // the duration sensitivity. Its equation is the time-scaled one, so RK4 returns
    // the exact derivative of the discrete map rather than f(x(T)).
    let inv_t = if duration != 0.0 { 1.0 / duration } else { 0.0 };
    let aug = |t: f64, y: &DVector<f64>| -> DVector<f64> {
        let x = y.rows(0, n).into_owned();
        let mut out = DVector::zeros(y.len());
        out.rows_mut(0, n).copy_from(&field.rhs(t, &x, p));
        if variational {
            let j = field.jac_x(t, &x, p);
            let phi = DMatrix::from_column_slice(n, n, y.rows(n, n * n).as_slice());
            out.rows_mut(n, n * n).copy_from_slice((&j * phi).as_slice());
            if ns > 0 {
                let s = DMatrix::from_column_slice(n, ns, y.rows(n + n * n, n * ns).as_slice());
                let fp = field.jac_p(t, &x, p);
                let mut ds = &j * s;
                for (c, &k) in sens.iter().enumerate() {
                    let mut col = ds.column_mut(c);
                    col += fp.column(k);
                }
                out.rows_mut(n + n * n, n * ns).copy_from_slice(ds.as_slice());
            }
            let o = n + n * n + n * ns;
            let sig = y.rows(o, n);
            let f = out.rows(0, n).into_owned();
            let ft = field.jac_t(t, &x, p);
            let ds = (f + ft * (t - t0)) * inv_t + &j * sig;
            out.rows_mut(o, n).copy_from(&ds);
        }
        out
    };
    let len = if variational { 2 * n + n * n + n * ns } else { n };
    let mut y = DVector::zeros(len);
    y.rows_mut(0, n).copy_from(x0);
    if variational {
        for i in 0..n {
            y[n + i * n + i] = 1.0;
        }
    }
    let mut t = t0;
    for _ in 0..steps {
        let k1 = aug(t, &y);
        let k2 = aug(t + 0.5 * h, &(&y + &k1 * (0.5 * h)));
        let k3 = aug(t + 0.5 * h, &(&y + &k2 * (0.5 * h)));
        let k4 = aug(t + h, &(&y + &k3 * h));
        y += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        t += h;
    }
    let x = y.rows(0, n).into_owned();
    if !variational {
        return Flow { x, phi: None, dp: None, dt: None };
    }
    let phi = DMatrix::from_column_slice(n, n, y.rows(n, n * n).as_slice());
    let dp = (ns > 0).then(|| DMatrix::from_column_slice(n, ns, y.rows(n + n * n, n * ns).as_slice()));
    let dt = Some(y.rows(n + n * n + n * ns, n).into_owned());
    Flow { x, phi: Some(phi), dp, dt }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorusSolution {
    pub n_h: usize,
    /// Initial points `u_i(0)` on the curve at `theta_i = 2 pi i / (2 n_h + 1)`.
    pub points: Vec<Vec<f64>>,
    /// Segment length `T_2`; the forcing period for non-autonomous fields.
    pub t2: f64,
    pub rho: f64,
    pub params: Vec<f64>,
    pub autonomous: bool,
    pub steps: usize,
    /// Largest boundary-closure error over the segments.
    pub residual: f64,
}

impl TorusSolution {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// `2 pi / T_2`.
    pub fn omega2(&self) -> f64 {
        2.0 * PI / self.t2
    }

    /// `rho omega_2`.
    pub fn omega1(&self) -> f64 {
        self.rho * self.omega2()
    }

    fn vectors(&self) -> Vec<DVector<f64>> {
        self.points.iter().map(|p| DVector::from_column_slice(p)).collect()
    }

    /// Sampled segments `u_i(t)` at `n_samples + 1` equispaced times on `[0, T_2]`.
    pub fn segments<D: Dynamics>(&self, field: &D, n_samples: usize) -> Vec<Vec<DVector<f64>>> {
        let sub = self.steps.div_ceil(n_samples.max(1)).max(1);
        let dt = self.t2 / n_samples as f64;
        self.vectors()
            .par_iter()
            .map(|u0| {
                let mut out = vec![u0.clone()];
                let mut x = u0.clone();
                for k in 0..n_samples {
                    x = rk4_flow(field, k as f64 * dt, &x, dt, sub, &self.params, false, &[]).x;
                    out.push(x.clone());
                }
                out
            })
            .collect()
    }

    /// The initial curve evaluated at angle `theta` by trigonometric interpolation.
    pub fn curve(&self, theta: f64) -> DVector<f64> {
        let n = self.n_points();
        let mut acc = DVector::zeros(self.dim());
        for (j, p) in self.vectors().iter().enumerate() {
            let (d, _) = dirichlet(self.n_h, theta - 2.0 * PI * j as f64 / n as f64);
            acc.axpy(d, p, 1.0);
        }
        acc
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorusSeed {
    pub points: Vec<DVector<f64>>,
    pub t2: f64,
    pub rho: f64,
    pub params: Vec<f64>,
    pub direction: Option<Vec<f64>>,
    pub warning: Option<String>,
}

impl TorusSeed {
    pub fn from_solution(tor: &TorusSolution) -> Self {
        Self { points: tor.vectors(), t2: tor.t2, rho: tor.rho, params: tor.params.clone(), direction: None, warning: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TorusMode {
    /// `rho` is an unknown; one parameter varies.
    FreeRho,
    /// `rho` stays at its seed value; parameter `other` varies too.
    FixedRho { other: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TorusOptions {
    pub settings: ContinuationSettings,
    pub steps: usize,
    pub mode: TorusMode,
}

impl Default for TorusOptions {
    fn default() -> Self {
        Self {
            settings: ContinuationSettings { h0: 1e-3, h_max: 0.02, max_points: 400, ..Default::default() },
            steps: 200,
            mode: TorusMode::FreeRho,
        }
    }
}

struct Reference {
    points: Vec<DVector<f64>>,
    dtheta: Vec<DVector<f64>>,
    flow: Vec<DVector<f64>>,
}

pub struct TorusProblem<'a, D: Dynamics> {
    field: &'a D,
    n_pts: usize,
    dim: usize,
    params: Vec<f64>,
    rho_fixed: Option<f64>,
    /// Varying parameters; the last one is the continuation parameter.
    free: Vec<usize>,
    steps: usize,
    t_weight: f64,
    d_theta: DMatrix<f64>,
    reference: RwLock<Reference>,
}

impl<'a, D: Dynamics> TorusProblem<'a, D> {
    pub fn new(field: &'a D, seed: &TorusSeed, free: usize, mode: TorusMode, steps: usize) -> Result<Self> {
        let n_pts = seed.points.len();
        harmonics(n_pts)?;
        let dim = field.dim();
        if seed.points.iter().any(|p| p.len() != dim) {
            return Err(Error::Dimension(format!("torus points must have {dim} entries")));
        }
        if seed.params.len() != field.n_params() || free >= field.n_params() {
            return Err(Error::Dimension("torus parameter index out of range".into()));
        }
        if !field.is_autonomous() && field.forcing_frequency(&seed.params).is_none() {
            return Err(Error::InvalidInput("non-autonomous field without a forcing frequency".into()));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("shooting needs at least one step".into()));
        }
        let (rho_fixed, free) = match mode {
            TorusMode::FreeRho => (None, vec![free]),
            TorusMode::FixedRho { other } if other != free && other < field.n_params() => (Some(seed.rho), vec![other, free]),
            TorusMode::FixedRho { .. } => return Err(Error::InvalidInput("fixed-rho mode needs a second, distinct parameter".into())),
        };
        let prob = Self {
            field,
            n_pts,
            dim,
            params: seed.params.clone(),
            rho_fixed,
            free,
            steps,
            t_weight: 1.0 / (seed.t2 * seed.t2).max(1e-300),
            d_theta: theta_derivative(n_pts),
            reference: RwLock::new(Reference { points: Vec::new(), dtheta: Vec::new(), flow: Vec::new() }),
        };
        prob.set_reference(&seed.points, &seed.params);
        Ok(prob)
    }

    fn autonomous(&self) -> bool {
        self.field.is_autonomous()
    }

    fn nx(&self) -> usize {
        self.n_pts * self.dim
    }

    fn set_reference(&self, points: &[DVector<f64>], p: &[f64]) {
        let dtheta = apply_rows(&self.d_theta, points);
        let flow = points.iter().map(|x| self.field.rhs(0.0, x, p)).collect();
        *self.reference.write().unwrap() = Reference { points: points.to_vec(), dtheta, flow };
    }

    pub fn pack(&self, seed: &TorusSeed) -> DVector<f64> {
        let mut u: Vec<f64> = seed.points.iter().flat_map(|p| p.iter().copied()).collect();
        if self.autonomous() {
            u.push(seed.t2);
        }
        if self.rho_fixed.is_none() {
            u.push(seed.rho);
        }
        u.extend(self.free.iter().map(|&k| seed.params[k]));
        DVector::from_vec(u)
    }

    fn points_of(&self, u: &DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.n_pts).map(|i| u.rows(i * self.dim, self.dim).into_owned()).collect()
    }

    fn params_of(&self, u: &DVector<f64>) -> Vec<f64> {
        let mut p = self.params.clone();
        let base = u.len() - self.free.len();
        for (c, &k) in self.free.iter().enumerate() {
            p[k] = u[base + c];
        }
        p
    }

    fn rho_of(&self, u: &DVector<f64>) -> f64 {
        self.rho_fixed.unwrap_or_else(|| u[self.nx() + usize::from(self.autonomous())])
    }

    fn period_of(&self, u: &DVector<f64>, p: &[f64]) -> f64 {
        if self.autonomous() {
            u[self.nx()]
        } else {
            2.0 * PI / self.field.forcing_frequency(p).unwrap()
        }
    }

    fn n_phase(&self) -> usize {
        1 + usize::from(self.autonomous())
    }

    fn shoot(&self, pts: &[DVector<f64>], period: f64, p: &[f64], variational: bool) -> Vec<Flow> {
        pts.par_iter().map(|x| rk4_flow(self.field, 0.0, x, period, self.steps, p, variational, if variational { &self.free } else { &[] })).collect()
    }

    fn closure(&self, ends: &[DVector<f64>], pts: &[DVector<f64>], rho: f64) -> Vec<DVector<f64>> {
        let (r, _) = rotation_matrix(self.n_pts, rho).unwrap();
        let target = apply_rows(&r, pts);
        ends.iter().zip(target).map(|(e, t)| e - t).collect()
    }

    pub fn solution(&self, u: &DVector<f64>) -> Result<TorusSolution> {
        let p = self.params_of(u);
        let pts = self.points_of(u);
        let period = self.period_of(u, &p);
        let rho = self.rho_of(u);
        let ends: Vec<_> = self.shoot(&pts, period, &p, false).into_iter().map(|f| f.x).collect();
        let residual = self.closure(&ends, &pts, rho).iter().map(|d| d.amax()).fold(0.0, f64::max);
        Ok(TorusSolution {
            n_h: (self.n_pts - 1) / 2,
            points: pts.iter().map(|v| v.iter().copied().collect()).collect(),
            t2: period,
            rho,
            params: p,
            autonomous: self.autonomous(),
            steps: self.steps,
            residual,
        })
    }
}

impl<D: Dynamics> ZeroProblem for TorusProblem<'_, D> {
    fn n_unknowns(&self) -> usize {
        self.nx() + usize::from(self.autonomous()) + usize::from(self.rho_fixed.is_none()) + self.free.len()
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let p = self.params_of(u);
        let pts = self.points_of(u);
        let period = self.period_of(u, &p);
        let ends: Vec<_> = self.shoot(&pts, period, &p, false).into_iter().map(|f| f.x).collect();
        let gaps = self.closure(&ends, &pts, self.rho_of(u));
        let nx = self.nx();
        let mut out = DVector::zeros(nx + self.n_phase());
        for (i, g) in gaps.iter().enumerate() {
            out.rows_mut(i * self.dim, self.dim).copy_from(g);
        }
        let rf = self.reference.read().unwrap();
        let inv = 1.0 / self.n_pts as f64;
        out[nx] = pts.iter().zip(&rf.points).zip(&rf.dtheta).map(|((x, r), d)| (x - r).dot(d)).sum::<f64>() * inv;
        if self.autonomous() {
            out[nx + 1] = pts.iter().zip(&rf.points).zip(&rf.flow).map(|((x, r), f)| (x - r).dot(f)).sum::<f64>() * inv;
        }
        out
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let p = self.params_of(u);
        let pts = self.points_of(u);
        let period = self.period_of(u, &p);
        let rho = self.rho_of(u);
        let flows = self.shoot(&pts, period, &p, true);
        let (n, np, nx) = (self.dim, self.n_pts, self.nx());
        let nu = self.n_unknowns();
        let mut jac = DMatrix::zeros(nx + self.n_phase(), nu);
        let (r, dr) = rotation_matrix(np, rho).unwrap();
        let eye = DMatrix::<f64>::identity(n, n);
        for i in 0..np {
            for k in 0..np {
                let mut blk = &eye * (-r[(i, k)]);
                if i == k {
                    blk += flows[i].phi.as_ref().unwrap();
                }
                jac.view_mut((i * n, k * n), (n, n)).copy_from(&blk);
            }
        }
        let mut col = nx;
        let ends: Vec<&DVector<f64>> = flows.iter().map(|f| f.dt.as_ref().unwrap()).collect();
        if self.autonomous() {
            for i in 0..np {
                jac.view_mut((i * n, col), (n, 1)).copy_from(ends[i]);
            }
            col += 1;
        }
        if self.rho_fixed.is_none() {
            let d = apply_rows(&dr, &pts);
            for i in 0..np {
                jac.view_mut((i * n, col), (n, 1)).copy_from(&(-&d[i]));
            }
            col += 1;
        }
        for (c, &k) in self.free.iter().enumerate() {
            // Non-autonomous segments also stretch with the forcing period.
            let dt_dp = if self.autonomous() {
                0.0
            } else {
                let h = 1e-7 * p[k].abs().max(1.0);
                let mut q = p.clone();
                q[k] = p[k] + h;
                let tp = 2.0 * PI / self.field.forcing_frequency(&q).unwrap();
                q[k] = p[k] - h;
                let tm = 2.0 * PI / self.field.forcing_frequency(&q).unwrap();
                (tp - tm) / (2.0 * h)
            };
            for i in 0..np {
                let s = flows[i].dp.as_ref().unwrap().column(c) + ends[i] * dt_dp;
                jac.view_mut((i * n, col + c), (n, 1)).copy_from(&s);
            }
        }
        let rf = self.reference.read().unwrap();
        let inv = 1.0 / np as f64;
        for i in 0..np {
            jac.view_mut((nx, i * n), (1, n)).copy_from(&(rf.dtheta[i].transpose() * inv));
            if self.autonomous() {
                jac.view_mut((nx + 1, i * n), (1, n)).copy_from(&(rf.flow[i].transpose() * inv));
            }
        }
        jac
    }

    fn weights(&self) -> DVector<f64> {
        let mut w = DVector::from_element(self.n_unknowns(), 1.0);
        w.rows_mut(0, self.nx()).fill(1.0 / self.n_pts as f64);
        if self.autonomous() {
            w[self.nx()] = self.t_weight;
        }
        w
    }

    fn accept(&self, u: &DVector<f64>) {
        let p = self.params_of(u);
        self.set_reference(&self.points_of(u), &p);
    }
}

/// Closure error of a stored torus, re-shot with its own step count.
pub fn torus_residual<D: Dynamics>(tor: &TorusSolution, field: &D) -> f64 {
    let pts = tor.vectors();
    let (r, _) = rotation_matrix(pts.len(), tor.rho).expect("stored torus has an odd point count");
    let target = apply_rows(&r, &pts);
    pts.par_iter()
        .zip(target.par_iter())
        .map(|(x, t)| (rk4_flow(field, 0.0, x, tor.t2, tor.steps, &tor.params, false, &[]).x - t).amax())
        .reduce(|| 0.0, f64::max)
}

/// Seed a torus at a TR point of `po`: the cycle's base point displaced along the
/// critical Floquet eigenplane, rotation number `alpha / 2 pi`.
pub fn tr_switch<D: Dynamics>(field: &D, po: &PoSolution, n_h: usize, delta: f64, steps: usize) -> Result<TorusSeed> {
    let n = field.dim();
    let x0 = po.eval(0.0);
    let flow = rk4_flow(field, 0.0, &x0, po.period, steps, &po.params, true, &[]);
    let mono = flow.phi.unwrap();
    let mu = crate::spectral::real_matrix_eigenvalues(&mono)?;
    let lam = mu
        .iter()
        .filter(|z| z.im > 1e-8)
        .min_by(|a, b| (a.norm() - 1.0).abs().total_cmp(&(b.norm() - 1.0).abs()))
        .copied()
        .ok_or_else(|| Error::InvalidInput("no complex multiplier pair at the TR point".into()))?;
    let alpha = lam.arg();
    let shifted = mono.map(|v| Complex64::new(v, 0.0)) - DMatrix::<Complex64>::identity(n, n) * lam;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Eigen("SVD failed".into()))?;
    let w: DVector<Complex64> = vt.row(n - 1).transpose().map(|z| z.conj());
    let w = &w / Complex64::new(w.norm(), 0.0);
    let n_pts = 2 * n_h + 1;
    let d = delta * x0.norm().max(1.0);
    let offsets: Vec<DVector<f64>> = (0..n_pts)
        .map(|j| {
            let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n_pts as f64);
            w.map(|z| (z * e).re) * d
        })
        .collect();
    let points: Vec<DVector<f64>> = offsets.iter().map(|o| &x0 + o).collect();
    // Grow the curve first; continue_torus pads the remaining unknowns with zeros.
    let dir: Vec<f64> = offsets.iter().flat_map(|o| o.iter().copied().collect::<Vec<_>>()).collect();
    let warning = [0.0, PI / 2.0, 2.0 * PI / 3.0]
        .iter()
        .find(|&&a| (alpha - a).abs() < 0.05)
        .map(|a| format!("TR angle {alpha:.4} is near the strong resonance {a:.4}"));
    Ok(TorusSeed { points, t2: po.period, rho: alpha / (2.0 * PI), params: po.params.clone(), direction: Some(dir), warning })
}

/// Newton correction of a torus at fixed parameters.
pub fn solve_torus<D: Dynamics>(field: &D, seed: &TorusSeed, free: usize, steps: usize, tol: f64) -> Result<TorusSolution> {
    let prob = TorusProblem::new(field, seed, free, TorusMode::FreeRho, steps)?;
    let mut u = prob.pack(seed);
    let nu = u.len();
    for _ in 0..30 {
        let res = prob.residual(&u);
        let jac = prob.jacobian(&u).columns(0, nu - 1).into_owned();
        let svd = jac.svd(true, true);
        let du = svd.solve(&res, 1e-13).map_err(|e| Error::Singular(e.to_string()))?;
        u.rows_mut(0, nu - 1).axpy(-1.0, &du, 1.0);
        if du.amax() < tol * u.rows(0, nu - 1).amax().max(1.0) {
            return prob.solution(&u);
        }
    }
    Err(Error::NoConvergence("torus Newton did not converge".into()))
}

/// Continue a torus family in parameter `free` over `range`.
pub fn continue_torus<D: Dynamics>(field: &D, seed: &TorusSeed, free: usize, range: (f64, f64), opts: &TorusOptions) -> Result<Branch<TorusSolution>> {
    let prob = TorusProblem::new(field, seed, free, opts.mode, opts.steps)?;
    let u0 = prob.pack(seed);
    let nu = u0.len();
    let mut s = opts.settings.clone();
    s.window = vec![ParamBound { index: nu - 1, lo: range.0, hi: range.1 }];
    let dir = match &seed.direction {
        Some(d) if d.len() <= nu => DVector::from_iterator(nu, d.iter().copied().chain(std::iter::repeat(0.0)).take(nu)),
        Some(_) => return Err(Error::Dimension("seed direction has the wrong length".into())),
        None => {
            let mut d = DVector::zeros(nu);
            d[nu - 1] = 1.0;
            d
        }
    };
    let raw = continue_branch(&prob, u0, dir, &s)?;
    map_branch(raw, BranchKind::Torus2, &s, |p| prob.solution(&p.u))
}
