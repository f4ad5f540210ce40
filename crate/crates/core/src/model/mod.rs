//! Mechanical systems, their first-order form and the two built-in examples.

mod beam;
pub mod ingest;
mod poly;

pub use beam::{beam_tip_dof, build_beam, build_bernoulli_beam, BeamGeometry, BEAM_GEOMETRY};
pub use poly::{PolyTerm, PolynomialForce};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `M x'' + C x' + K x + f_nl(x, x') = eps * f_ext * cos(Omega t)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MechSystem {
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Polynomial on the stacked state `(x, x')` of length `2n`, output length `n`.
    pub f_nl: PolynomialForce,
    pub f_ext: DVector<f64>,
}

impl MechSystem {
    pub fn new(
        m: DMatrix<f64>,
        c: DMatrix<f64>,
        k: DMatrix<f64>,
        f_nl: PolynomialForce,
        f_ext: DVector<f64>,
    ) -> Result<Self> {
        let n = m.nrows();
        for (name, mat) in [("M", &m), ("C", &c), ("K", &k)] {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
            }
        }
        if f_ext.len() != n {
            return Err(Error::Dimension(format!("f_ext has length {}, expected {n}", f_ext.len())));
        }
        if f_nl.input_dim() != 2 * n || f_nl.output_dim() != n {
            return Err(Error::Dimension(format!(
                "f_nl maps R^{} -> R^{}, expected R^{} -> R^{n}",
                f_nl.input_dim(),
                f_nl.output_dim(),
                2 * n
            )));
        }
        if !f_nl.is_empty() && f_nl.min_degree() < 2 {
            return Err(Error::InvalidInput(
                "f_nl must not contain constant or linear terms".into(),
            ));
        }
        Ok(Self { m, c, k, f_nl, f_ext })
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// Undamped natural frequencies and mass-normalized mode shapes, ascending.
    pub fn undamped_modes(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let chol = self
            .m
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("mass matrix is not positive definite".into()))?;
        let l = chol.l();
        let linv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("Cholesky factor of M".into()))?;
        let mut s = &linv * &self.k * linv.transpose();
        s = (&s + s.transpose()) * 0.5;
        let eig = s.symmetric_eigen();
        let mut idx: Vec<usize> = (0..self.n()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let omega = DVector::from_iterator(
            self.n(),
            idx.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()),
        );
        let mut phi = DMatrix::zeros(self.n(), self.n());
        for (col, &i) in idx.iter().enumerate() {
            let mut v = linv.transpose() * eig.eigenvectors.column(i);
            let (imax, _) = v.iter().enumerate().fold((0, 0.0), |acc, (j, x)| {
                if x.abs() > acc.1 { (j, x.abs()) } else { acc }
            });
            if v[imax] < 0.0 {
                v = -v;
            }
            phi.set_column(col, &v);
        }
        Ok((omega, phi))
    }
}

/// `B z' = A z + F_nl(z) + eps (F_a e^{i phi} + c.c.)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FirstOrderSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub f_nl: PolynomialForce,
    pub f_a: DVector<Complex64>,
    /// Mass matrix when assembled from a mechanical system; used to normalize
    /// the displacement part of eigenvectors.
    pub mass: Option<DMatrix<f64>>,
    b_inv: DMatrix<f64>,
}

impl FirstOrderSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        f_nl: PolynomialForce,
        f_a: DVector<Complex64>,
        mass: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || b.ncols() != n {
            return Err(Error::Dimension("A and B must be square of equal size".into()));
        }
        if f_a.len() != n || f_nl.input_dim() != n || f_nl.output_dim() != n {
            return Err(Error::Dimension(format!("forcing and nonlinearity must act on R^{n}")));
        }
        if let Some(m) = &mass {
            if 2 * m.nrows() != n {
                return Err(Error::Dimension("mass matrix must be half the state size".into()));
            }
        }
        let b_inv = b
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("B is not invertible".into()))?;
        Ok(Self { a, b, f_nl, f_a, mass, b_inv })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn b_inv(&self) -> &DMatrix<f64> {
        &self.b_inv
    }

    /// Number of mechanical degrees of freedom, if assembled from one.
    pub fn n_dof(&self) -> Option<usize> {
        self.mass.as_ref().map(|m| m.nrows())
    }

    /// Real forcing vector `F_a e^{i phi} + c.c.`.
    pub fn forcing(&self, phi: f64) -> DVector<f64> {
        let e = Complex64::from_polar(1.0, phi);
        self.f_a.map(|f| 2.0 * (f * e).re)
    }

    /// `z' = B^{-1}(A z + F_nl(z) + eps F_ext(phi))`.
    pub fn rhs(&self, z: &DVector<f64>, phi: f64, eps: f64) -> DVector<f64> {
        let mut g = &self.a * z + self.f_nl.eval(z);
        if eps != 0.0 {
            g += self.forcing(phi) * eps;
        }
        &self.b_inv * g
    }

    pub fn rhs_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        &self.b_inv * (&self.a + self.f_nl.jacobian(z))
    }
}

pub fn assemble_first_order(mech: &MechSystem) -> Result<FirstOrderSystem> {
    let n = mech.n();
    let nn = 2 * n;
    let mut a = DMatrix::zeros(nn, nn);
    a.view_mut((0, 0), (n, n)).copy_from(&(-&mech.k));
    a.view_mut((n, n), (n, n)).copy_from(&mech.m);
    let mut b = DMatrix::zeros(nn, nn);
    b.view_mut((0, 0), (n, n)).copy_from(&mech.c);
    b.view_mut((0, n), (n, n)).copy_from(&mech.m);
    b.view_mut((n, 0), (n, n)).copy_from(&mech.m);
    let f_nl = mech.f_nl.remap(nn, nn, |i| i, |o| o, -1.0)?;
    let mut f_a = DVector::from_element(nn, Complex64::new(0.0, 0.0));
    for i in 0..n {
        f_a[i] = Complex64::new(0.5 * mech.f_ext[i], 0.0);
    }
    FirstOrderSystem::new(a, b, f_nl, f_a, Some(mech.m.clone()))
}

/// Two oscillators with natural frequencies 1 and 2 and quadratic coupling
/// `b1 x1 x2` (first equation) and `b2 x1^2` (second equation).
pub fn build_coupled_oscillators(c1: f64, c2: f64, b1: f64, b2: f64, f1: f64, f2: f64) -> Result<MechSystem> {
    if [c1, c2, b1, b2, f1, f2].iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("parameters must be finite".into()));
    }
    if c1 < 0.0 || c2 < 0.0 {
        return Err(Error::InvalidInput("damping coefficients must be nonnegative".into()));
    }
    let f_nl = PolynomialForce::new(
        4,
        2,
        vec![
            PolyTerm { coeff: b1, output: 0, factors: vec![(0, 1), (1, 1)] },
            PolyTerm { coeff: b2, output: 1, factors: vec![(0, 2)] },
        ],
    )?;
    MechSystem::new(
        DMatrix::identity(2, 2),
        DMatrix::from_diagonal(&DVector::from_vec(vec![c1, c2])),
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
        f_nl,
        DVector::from_vec(vec![f1, f2]),
    )
}

/// The 1:2 resonant pair with `c = (0.005, 0.01)`, `b = (0.3, 1)`, forced on the first oscillator.
/// The load is `2 eps cos(Omega t)`, i.e. a unit complex amplitude on `e^{i Omega t}`.
pub fn example1_oscillators() -> MechSystem {
    build_coupled_oscillators(0.005, 0.01, 0.3, 1.0, 2.0, 0.0).expect("valid parameters")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dof(m: f64, c: f64, k: f64, f: f64) -> MechSystem {
        MechSystem::new(
            DMatrix::from_element(1, 1, m),
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, k),
            PolynomialForce::zero(2, 1),
            DVector::from_element(1, f),
        )
        .unwrap()
    }

    #[test]
    fn one_dof_blocks() {
        let fo = assemble_first_order(&one_dof(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(fo.a, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
        assert_eq!(fo.b, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]));
        assert_eq!(fo.f_a[0], Complex64::new(0.5, 0.0));
        assert_eq!(fo.f_a[1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn coupled_oscillator_pencil() {
        let mech = build_coupled_oscillators(0.005, 0.01, 0.3, 1.0, 1.0, 0.0).unwrap();
        let fo = assemble_first_order(&mech).unwrap();
        assert_eq!(fo.dim(), 4);
        let z = DVector::from_vec(vec![0.2, -0.5, 0.1, 0.3]);
        let f = fo.f_nl.eval(&z);
        assert!((f[0] + 0.3 * 0.2 * -0.5).abs() < 1e-15);
        assert!((f[1] + 0.04).abs() < 1e-15);
        assert_eq!(f[2], 0.0);
        assert_eq!(f[3], 0.0);
    }

    #[test]
    fn linear_pair_frequencies() {
        let mech = build_coupled_oscillators(0.0, 0.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let (w, _) = mech.undamped_modes().unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 2.0).abs() < 1e-12);
        assert!(mech.f_nl.is_empty());
    }

    #[test]
    fn zero_forcing_amplitude() {
        let mech = build_coupled_oscillators(0.005, 0.01, 0.3, 1.0, 0.0, 0.0).unwrap();
        let fo = assemble_first_order(&mech).unwrap();
        assert!(fo.f_a.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn rejects_linear_force_terms() {
        let f = PolynomialForce::new(2, 1, vec![PolyTerm { coeff: 1.0, output: 0, factors: vec![(0, 1)] }]).unwrap();
        let r = MechSystem::new(
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::identity(1, 1),
            f,
            DVector::zeros(1),
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_negative_damping() {
        assert!(build_coupled_oscillators(-1.0, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn first_order_matches_second_order() {
        let mech = build_coupled_oscillators(0.05, 0.01, 0.3, 1.0, 1.0, 0.5).unwrap();
        let fo = assemble_first_order(&mech).unwrap();
        for s in 0..5 {
            let t = s as f64 * 0.37;
            let z = DVector::from_vec(vec![t.sin(), 0.3 * t.cos(), -0.2 * t, 0.1 + t * t]);
            let phi = 1.3 * t;
            let dz = fo.rhs(&z, phi, 0.02);
            let x = z.rows(0, 2).into_owned();
            let v = z.rows(2, 2).into_owned();
            let acc = dz.rows(2, 2).into_owned();
            assert!((dz.rows(0, 2) - &v).norm() < 1e-14);
            let res = &mech.m * acc + &mech.c * &v + &mech.k * &x + mech.f_nl.eval(&z)
                - &mech.f_ext * (0.02 * phi.cos());
            assert!(res.norm() < 1e-10);
        }
    }

    #[test]
    fn forcing_is_real_cosine() {
        let fo = assemble_first_order(&one_dof(1.0, 0.0, 1.0, 2.0)).unwrap();
        for k in 0..8 {
            let phi = k as f64 * 0.7;
            assert!((fo.forcing(phi)[0] - 2.0 * phi.cos()).abs() < 1e-14);
        }
    }
}
