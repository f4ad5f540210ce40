use nalgebra::{DMatrix, DVector, Matrix4};

use super::{MechSystem, PolyTerm, PolynomialForce};
use crate::error::{Error, Result};

/// Cross section, length and material of a uniform beam, in kg-mm-s units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamGeometry {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub density: f64,
    pub young: f64,
}

pub const BEAM_GEOMETRY: BeamGeometry = BeamGeometry {
    length: 2700.0,
    width: 10.0,
    height: 10.0,
    density: 1780e-9,
    young: 45e6,
};

fn element_matrices(g: &BeamGeometry, le: f64) -> (Matrix4<f64>, Matrix4<f64>) {
    let area = g.width * g.height;
    let inertia = g.width * g.height.powi(3) / 12.0;
    let ei = g.young * inertia / le.powi(3);
    let l = le;
    let k = Matrix4::new(
        12.0, 6.0 * l, -12.0, 6.0 * l,
        6.0 * l, 4.0 * l * l, -6.0 * l, 2.0 * l * l,
        -12.0, -6.0 * l, 12.0, -6.0 * l,
        6.0 * l, 2.0 * l * l, -6.0 * l, 4.0 * l * l,
    ) * ei;
    let m = Matrix4::new(
        156.0, 22.0 * l, 54.0, -13.0 * l,
        22.0 * l, 4.0 * l * l, 13.0 * l, -3.0 * l * l,
        54.0, 13.0 * l, 156.0, -22.0 * l,
        -13.0 * l, -3.0 * l * l, -22.0 * l, 4.0 * l * l,
    ) * (g.density * area * le / 420.0);
    (k, m)
}

/// Tip deflection DOF index of a cantilever with `n_elements` elements.
pub fn beam_tip_dof(n_elements: usize) -> usize {
    2 * (n_elements - 1)
}

/// Cantilever with a spring `k_l w + k_nl w^3` at the free tip and Rayleigh
/// damping `alpha M + beta K_b` (the spring excluded from `K_b`). The forcing
/// shape excites the first mode only: `f = omega_1^2 M phi_1`.
pub fn build_bernoulli_beam(n_elements: usize, k_l: f64, k_nl: f64, alpha: f64, beta: f64) -> Result<MechSystem> {
    build_beam(&BEAM_GEOMETRY, n_elements, k_l, k_nl, alpha, beta)
}

pub fn build_beam(
    geom: &BeamGeometry,
    n_elements: usize,
    k_l: f64,
    k_nl: f64,
    alpha: f64,
    beta: f64,
) -> Result<MechSystem> {
    if n_elements < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 elements, got {n_elements}")));
    }
    if [k_l, k_nl, alpha, beta].iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("beam parameters must be finite".into()));
    }
    let le = geom.length / n_elements as f64;
    let (ke, me) = element_matrices(geom, le);
    let full = 2 * (n_elements + 1);
    let mut kf = DMatrix::zeros(full, full);
    let mut mf = DMatrix::zeros(full, full);
    for e in 0..n_elements {
        let o = 2 * e;
        for i in 0..4 {
            for j in 0..4 {
                kf[(o + i, o + j)] += ke[(i, j)];
                mf[(o + i, o + j)] += me[(i, j)];
            }
        }
    }
    // Clamp node 0 by dropping its two DOFs.
    let n = full - 2;
    let kb = kf.view((2, 2), (n, n)).into_owned();
    let m = mf.view((2, 2), (n, n)).into_owned();
    let tip = beam_tip_dof(n_elements);
    let mut k = kb.clone();
    k[(tip, tip)] += k_l;
    let c = &m * alpha + &kb * beta;
    let f_nl = if k_nl == 0.0 {
        PolynomialForce::zero(2 * n, n)
    } else {
        PolynomialForce::new(2 * n, n, vec![PolyTerm { coeff: k_nl, output: tip, factors: vec![(tip, 3)] }])?
    };
    let mut mech = MechSystem::new(m, c, k, f_nl, DVector::zeros(n))?;
    let (omega, phi) = mech.undamped_modes()?;
    mech.f_ext = &mech.m * phi.column(0) * omega[0].powi(2);
    Ok(mech)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_single_element() {
        assert!(build_bernoulli_beam(1, 27.0, 60.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn two_elements_have_four_dofs() {
        let b = build_bernoulli_beam(2, 27.0, 60.0, 1.25e-4, 2.5e-5).unwrap();
        assert_eq!(b.n(), 4);
        assert_eq!(b.f_nl.terms().len(), 1);
        assert_eq!(b.f_nl.terms()[0].output, 2);
    }

    #[test]
    fn linear_beam_has_empty_force() {
        let b = build_bernoulli_beam(4, 27.0, 0.0, 1.25e-4, 2.5e-5).unwrap();
        assert!(b.f_nl.is_empty());
    }

    #[test]
    fn cantilever_first_frequency_converges_to_analytic() {
        let g = BEAM_GEOMETRY;
        let b = build_beam(&g, 20, 0.0, 0.0, 0.0, 0.0).unwrap();
        let (w, _) = b.undamped_modes().unwrap();
        let ei = g.young * g.width * g.height.powi(3) / 12.0;
        let rho_a = g.density * g.width * g.height;
        let w1 = 1.875104068711961_f64.powi(2) * (ei / (rho_a * g.length.powi(4))).sqrt();
        assert!((w[0] / w1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn forcing_excites_first_mode_only() {
        let b = build_bernoulli_beam(6, 27.0, 60.0, 1.25e-4, 2.5e-5).unwrap();
        let (w, phi) = b.undamped_modes().unwrap();
        let modal = phi.transpose() * &b.f_ext;
        assert!((modal[0] - w[0] * w[0]).abs() < 1e-8 * w[0] * w[0]);
        for i in 1..b.n() {
            assert!(modal[i].abs() < 1e-8 * w[0] * w[0]);
        }
    }

    #[test]
    fn damping_excludes_support_spring() {
        let b = build_bernoulli_beam(3, 27.0, 0.0, 0.0, 1.0).unwrap();
        let tip = beam_tip_dof(3);
        assert!((b.k[(tip, tip)] - b.c[(tip, tip)] - 27.0).abs() < 1e-9);
    }
}
