//! Piecewise-polynomial collocation on `[0, 1]` with periodic wrap-around.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::Dynamics;

/// `intervals` subintervals, each carrying a degree-`degree` polynomial
/// through `degree + 1` equispaced base points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Mesh {
    pub intervals: usize,
    pub degree: usize,
}

impl Default for Mesh {
    fn default() -> Self {
        Self { intervals: 10, degree: 4 }
    }
}

impl Mesh {
    /// Distinct base points over one period.
    pub fn n_points(&self) -> usize {
        self.intervals * self.degree
    }

    /// Normalized times of the base points.
    pub fn tau(&self) -> Vec<f64> {
        let n = self.n_points();
        (0..n).map(|k| k as f64 / n as f64).collect()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    (idx.iter().map(|&i| x[i]).collect(), idx.iter().map(|&i| w[i]).collect())
}

/// Lagrange basis values and derivatives at `x` for nodes `s`.
fn lagrange(s: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
    let n = s.len();
    let mut l = vec![0.0; n];
    let mut d = vec![0.0; n];
    for k in 0..n {
        let mut p = 1.0;
        let mut dp = 0.0;
        for j in 0..n {
            if j == k {
                continue;
            }
            let den = s[k] - s[j];
            dp = dp * (x - s[j]) / den + p / den;
            p *= (x - s[j]) / den;
        }
        l[k] = p;
        d[k] = dp;
    }
    (l, d)
}

/// Basis tables on the reference interval `[0, 1]`.
#[derive(Clone, Debug)]
pub(crate) struct Basis {
    pub mesh: Mesh,
    /// Collocation nodes (Gauss points).
    pub c: Vec<f64>,
    /// `la[(j, k)] = L_k(c_j)`, `ld` the derivatives.
    pub la: DMatrix<f64>,
    pub ld: DMatrix<f64>,
    /// Quadrature weights (one more point than collocation) and basis tables at those nodes.
    pub qw: Vec<f64>,
    pub lq: DMatrix<f64>,
    pub lqd: DMatrix<f64>,
}

impl Basis {
    pub fn new(mesh: Mesh) -> Self {
        let d = mesh.degree;
        let s: Vec<f64> = (0..=d).map(|k| k as f64 / d as f64).collect();
        let (c, _) = gauss_legendre(d);
        let (q, qw) = gauss_legendre(d + 1);
        let tab = |pts: &[f64]| {
            let mut a = DMatrix::zeros(pts.len(), d + 1);
            let mut b = DMatrix::zeros(pts.len(), d + 1);
            for (j, &x) in pts.iter().enumerate() {
                let (l, dl) = lagrange(&s, x);
                for k in 0..=d {
                    a[(j, k)] = l[k];
                    b[(j, k)] = dl[k];
                }
            }
            (a, b)
        };
        let (la, ld) = tab(&c);
        let (lq, lqd) = tab(&q);
        Self { mesh, c, la, ld, qw, lq, lqd }
    }

    /// Global point index of local node `k` of interval `i`.
    pub fn point(&self, i: usize, k: usize) -> usize {
        (i * self.mesh.degree + k) % self.mesh.n_points()
    }

    /// State at reference coordinate `s` of interval `i`, from a row table.
    pub fn combine(&self, x: &[f64], n: usize, i: usize, row: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for (k, &w) in row.iter().enumerate() {
            if w != 0.0 {
                let p = self.point(i, k);
                out += DVector::from_column_slice(&x[p * n..(p + 1) * n]) * w;
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64], n: usize, tau: f64) -> DVector<f64> {
        let ni = self.mesh.intervals;
        let t = tau.rem_euclid(1.0) * ni as f64;
        let i = (t.floor() as usize).min(ni - 1);
        let s: Vec<f64> = (0..=self.mesh.degree).map(|k| k as f64 / self.mesh.degree as f64).collect();
        let (l, _) = lagrange(&s, t - i as f64);
        self.combine(x, n, i, &l)
    }
}

/// Collocation residual `x' - T f(T tau, x, p)` at every node, stacked by interval.
pub(crate) fn residual<D: Dynamics>(b: &Basis, f: &D, x: &[f64], period: f64, p: &[f64]) -> DVector<f64> {
    let n = f.dim();
    let ni = b.mesh.intervals;
    let d = b.mesh.degree;
    let mut r = DVector::zeros(ni * d * n);
    for i in 0..ni {
        for j in 0..d {
            let xc = b.combine(x, n, i, b.la.row(j).transpose().as_slice());
            let dx = b.combine(x, n, i, b.ld.row(j).transpose().as_slice()) * ni as f64;
            let t = period * (i as f64 + b.c[j]) / ni as f64;
            let res = dx - f.rhs(t, &xc, p) * period;
            r.rows_mut((i * d + j) * n, n).copy_from(&res);
        }
    }
    r
}

/// Jacobian of `residual` with respect to the base-point states, and (for
/// autonomous fields) its derivative with respect to the period.
pub(crate) fn jacobian<D: Dynamics>(b: &Basis, f: &D, x: &[f64], period: f64, p: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = f.dim();
    let ni = b.mesh.intervals;
    let d = b.mesh.degree;
    let np = b.mesh.n_points();
    let mut jac = DMatrix::zeros(ni * d * n, np * n);
    let mut dt = DVector::zeros(ni * d * n);
    for i in 0..ni {
        for j in 0..d {
            let xc = b.combine(x, n, i, b.la.row(j).transpose().as_slice());
            let t = period * (i as f64 + b.c[j]) / ni as f64;
            let jx = f.jac_x(t, &xc, p);
            let row = (i * d + j) * n;
            for k in 0..=d {
                let col = b.point(i, k) * n;
                let mut blk = jx.clone() * (-period * b.la[(j, k)]);
                for e in 0..n {
                    blk[(e, e)] += b.ld[(j, k)] * ni as f64;
                }
                let mut v = jac.view_mut((row, col), (n, n));
                v += blk;
            }
            if f.is_autonomous() {
                dt.rows_mut(row, n).copy_from(&(-f.rhs(t, &xc, p)));
            }
        }
    }
    (jac, dt)
}

/// Monodromy matrix of the variational equation along the collocated orbit.
pub(crate) fn monodromy<D: Dynamics>(b: &Basis, f: &D, x: &[f64], period: f64, p: &[f64]) -> Option<DMatrix<f64>> {
    let n = f.dim();
    let ni = b.mesh.intervals;
    let d = b.mesh.degree;
    let mut m = DMatrix::<f64>::identity(n, n);
    for i in 0..ni {
        let mut a = DMatrix::zeros(d * n, d * n);
        let mut rhs = DMatrix::zeros(d * n, n);
        for j in 0..d {
            let xc = b.combine(x, n, i, b.la.row(j).transpose().as_slice());
            let t = period * (i as f64 + b.c[j]) / ni as f64;
            let jx = f.jac_x(t, &xc, p);
            for k in 0..=d {
                let mut blk = jx.clone() * (-period * b.la[(j, k)]);
                for e in 0..n {
                    blk[(e, e)] += b.ld[(j, k)] * ni as f64;
                }
                if k == 0 {
                    rhs.view_mut((j * n, 0), (n, n)).copy_from(&(-blk));
                } else {
                    a.view_mut((j * n, (k - 1) * n), (n, n)).copy_from(&blk);
                }
            }
        }
        let y = a.lu().solve(&rhs)?;
        let mi = y.view(((d - 1) * n, 0), (n, n)).into_owned();
        m = mi * m;
    }
    Some(m)
}

/// `(mean, sqrt(mean |x - mean|^2))` by Gauss quadrature of the interpolant.
pub(crate) fn mean_and_size(b: &Basis, x: &[f64], n: usize) -> (DVector<f64>, f64) {
    let ni = b.mesh.intervals;
    let mut mean = DVector::zeros(n);
    let mut vals = Vec::new();
    for i in 0..ni {
        for (g, &w) in b.qw.iter().enumerate() {
            let v = b.combine(x, n, i, b.lq.row(g).transpose().as_slice());
            mean += &v * (w / ni as f64);
            vals.push((v, w / ni as f64));
        }
    }
    let s: f64 = vals.iter().map(|(v, w)| (v - &mean).norm_squared() * w).sum();
    (mean, s.sqrt())
}
