use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::equilibria::{eq_test_functions, is_hopf_pair, EqPoint};
use super::{continue_both_ways, map_branch, Branch, BranchKind, ContinuationSettings, Event, EventKind, ParamBound, ZeroProblem};
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::rom::Rom;
use crate::spectral::real_matrix_eigenvalues;

/// Equilibrium of an autonomous two-parameter field plus one vanishing
/// test function; unknowns `(x, p0, p1)`.
pub struct Codim1Problem<'a, D: Dynamics> {
    pub field: &'a D,
    pub kind: EventKind,
    /// Normalization of the test function, fixed at the seed.
    pub scale: f64,
}

impl<D: Dynamics> Codim1Problem<'_, D> {
    fn split<'u>(&self, u: &'u DVector<f64>) -> (DVector<f64>, [f64; 2]) {
        let n = self.field.dim();
        (u.rows(0, n).into_owned(), [u[n], u[n + 1]])
    }

    fn raw_psi(&self, u: &DVector<f64>) -> f64 {
        let (x, p) = self.split(u);
        match eq_test_functions(&self.field.jac_x(0.0, &x, &p)) {
            Ok((sn, hb)) => {
                if self.kind == EventKind::SN {
                    sn
                } else {
                    hb
                }
            }
            Err(_) => f64::NAN,
        }
    }

    fn grad_psi(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(u.len());
        let mut v = u.clone();
        for k in 0..u.len() {
            let h = 1e-7 * (1.0 + u[k].abs());
            v[k] = u[k] + h;
            let fp = self.raw_psi(&v);
            v[k] = u[k] - h;
            let fm = self.raw_psi(&v);
            v[k] = u[k];
            g[k] = (fp - fm) / (2.0 * h);
        }
        g
    }
}

impl<D: Dynamics> ZeroProblem for Codim1Problem<'_, D> {
    fn n_unknowns(&self) -> usize {
        self.field.dim() + 2
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.field.dim();
        let (x, p) = self.split(u);
        let mut r = DVector::zeros(n + 1);
        r.rows_mut(0, n).copy_from(&self.field.rhs(0.0, &x, &p));
        r[n] = self.raw_psi(u) / self.scale;
        r
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.field.dim();
        let (x, p) = self.split(u);
        let mut j = DMatrix::zeros(n + 1, n + 2);
        j.view_mut((0, 0), (n, n)).copy_from(&self.field.jac_x(0.0, &x, &p));
        j.view_mut((0, n), (n, 2)).copy_from(&self.field.jac_p(0.0, &x, &p));
        let g = self.grad_psi(u) / self.scale;
        for k in 0..n + 2 {
            j[(n, k)] = g[k];
        }
        j
    }

    fn event_kinds(&self) -> Vec<EventKind> {
        vec![EventKind::CP]
    }

    /// The second parameter turns back at a cusp.
    fn test_functions(&self, _u: &DVector<f64>, t: &DVector<f64>) -> Vec<f64> {
        vec![t[self.field.dim() + 1]]
    }

    fn confirm_event(&self, _kind: EventKind, _u: &DVector<f64>) -> bool {
        self.kind == EventKind::SN
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: Vec<f64>,
    pub omega: f64,
    pub eps: f64,
    /// On Hopf curves: whether the critical pair is complex (true Hopf) rather than a neutral saddle.
    pub hopf: bool,
    /// Hopf frequency when `hopf`.
    pub omega_s: Option<f64>,
}

/// Continue an SN or HB equilibrium of `field` in both of its parameters.
pub fn continue_codim1_field<D: Dynamics>(
    field: &D,
    kind: EventKind,
    x0: &[f64],
    p0: [f64; 2],
    ranges: [(f64, f64); 2],
    settings: &ContinuationSettings,
) -> Result<Branch<CurvePoint>> {
    if kind != EventKind::SN && kind != EventKind::HB {
        return Err(Error::InvalidInput(format!("cannot continue {} curves", kind.label())));
    }
    if field.n_params() != 2 || !field.is_autonomous() {
        return Err(Error::InvalidInput("codim-1 continuation needs an autonomous field with two parameters".into()));
    }
    let n = field.dim();
    if x0.len() != n {
        return Err(Error::Dimension(format!("seed state has {} entries, field has {n}", x0.len())));
    }
    let mut u = DVector::zeros(n + 2);
    u.rows_mut(0, n).copy_from_slice(x0);
    u[n] = p0[0];
    u[n + 1] = p0[1];
    let mut prob = Codim1Problem { field, kind, scale: 1.0 };
    prob.scale = prob.grad_psi(&u).norm();
    if !(prob.scale > 0.0 && prob.scale.is_finite()) {
        return Err(Error::Singular("test function has no gradient at the seed".into()));
    }
    let mut s = settings.clone();
    s.window = vec![
        ParamBound { index: n, lo: ranges[0].0, hi: ranges[0].1 },
        ParamBound { index: n + 1, lo: ranges[1].0, hi: ranges[1].1 },
    ];
    // Null vector of the augmented Jacobian, oriented toward decreasing p1.
    let svd = prob.jacobian(&u).svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Eigen("SVD of the augmented Jacobian failed".into()))?;
    let mut dir = if vt.nrows() == n + 2 {
        vt.row(n + 1).transpose()
    } else {
        let mut d = DVector::zeros(n + 2);
        d[n + 1] = -1.0;
        d
    };
    if dir[n + 1] > 0.0 {
        dir = -dir;
    }
    let raw = continue_both_ways(&prob, u, dir, &s)?;
    map_branch(raw, BranchKind::EventCurve, &s, |pt| {
        let x = DVector::from_column_slice(&pt.u.as_slice()[..n]);
        let p = [pt.u[n], pt.u[n + 1]];
        let omega_s = if kind == EventKind::HB { is_hopf_pair(&real_matrix_eigenvalues(&field.jac_x(0.0, &x, &p))?) } else { None };
        Ok(CurvePoint { x: x.as_slice().to_vec(), omega: p[0], eps: p[1], hopf: omega_s.is_some(), omega_s })
    })
}

/// Continue an SN or HB point of a reduced-model equilibrium branch in `(Omega, eps)`.
pub fn continue_codim1(
    rom: &Rom,
    kind: EventKind,
    omega_range: (f64, f64),
    eps_range: (f64, f64),
    seed: &Event<EqPoint>,
    settings: &ContinuationSettings,
) -> Result<Branch<CurvePoint>> {
    if seed.kind != kind {
        return Err(Error::InvalidInput(format!("seed is a {} event, expected {}", seed.kind.label(), kind.label())));
    }
    continue_codim1_field(rom, kind, &seed.point.x, [seed.point.omega, seed.point.eps], [omega_range, eps_range], settings)
}
