use nalgebra::{DMatrix, DVector};

use super::*;
use crate::model::{assemble_first_order, build_bernoulli_beam, build_coupled_oscillators, MechSystem, PolyTerm};
use crate::spectral::{eig_pair, ResonanceSettings};

fn duffing(c_: f64, h: f64) -> FirstOrderSystem {
    let f = PolynomialForce::new(2, 1, vec![PolyTerm { coeff: h, output: 0, factors: vec![(0, 3)] }]).unwrap();
    let mech = MechSystem::new(
        DMatrix::identity(1, 1),
        DMatrix::from_element(1, 1, c_),
        DMatrix::identity(1, 1),
        f,
        DVector::from_element(1, 1.0),
    )
    .unwrap();
    assemble_first_order(&mech).unwrap()
}

fn reduce(sys: &FirstOrderSystem, modes: &[usize], order: u32, omega_ref: Option<f64>) -> ReducedModel {
    let k = 2 * (modes.iter().max().unwrap() + 1);
    let sp = eig_pair(sys, k).unwrap();
    let master = MasterSubspace::new(sys, &sp, modes, ResonanceSettings::default(), omega_ref).unwrap();
    expand_autonomous(sys, &master, order).unwrap()
}

fn example1() -> FirstOrderSystem {
    assemble_first_order(&build_coupled_oscillators(0.005, 0.01, 0.3, 1.0, 1.0, 0.0).unwrap()).unwrap()
}

#[test]
fn linear_system_has_no_gamma() {
    let sys = assemble_first_order(&build_coupled_oscillators(0.005, 0.01, 0.0, 0.0, 1.0, 0.0).unwrap()).unwrap();
    let rm = reduce(&sys, &[0, 1], 5, None);
    assert!(rm.gamma.iter().flatten().all(|g| g.coeff.norm() < 1e-14));
    for i in rm.table.up_to(5) {
        if rm.table.degree(i) >= 2 {
            assert!(rm.w[i].norm() < 1e-14);
        }
    }
    for s in 0..4 {
        assert!((&rm.w[rm.table.unit(s)] - rm.master.mode(s).1).norm() == 0.0);
    }
}

/// Frequency correction from first-order averaging of `x'' + x + h x^3 = 0`:
/// `(1 / (2 pi a)) * integral of h (a cos s)^3 cos s ds` divided by `a^2`.
fn averaging_backbone_coefficient(h: f64) -> f64 {
    let n = 2000;
    let a = 1.0;
    let mut acc = 0.0;
    for i in 0..n {
        let s = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        acc += h * (a * s.cos()).powi(3) * s.cos();
    }
    acc * (2.0 * std::f64::consts::PI / n as f64) / (2.0 * std::f64::consts::PI * a) / (a * a)
}

#[test]
fn duffing_gamma_matches_averaging() {
    let h = 0.7;
    let sys = duffing(0.0, h);
    let rm = reduce(&sys, &[0], 3, None);
    assert_eq!(rm.gamma[0].len(), 1);
    let g = &rm.gamma[0][0];
    assert_eq!((g.l.clone(), g.j.clone()), (vec![2], vec![1]));
    // x = 2 |v_x| rho cos(theta), so theta' - 1 = Im(gamma) rho^2 = Im(gamma) a^2 / (4 |v_x|^2).
    let vx = rm.master.v[0][0].norm();
    let coeff = g.coeff.im / (4.0 * vx * vx);
    assert!((coeff - averaging_backbone_coefficient(h)).abs() < 1e-10, "{coeff}");
    assert!(g.coeff.re.abs() < 1e-12);
}

#[test]
fn example1_quadratic_gammas() {
    let sys = example1();
    let rm = reduce(&sys, &[0, 1], 3, None);
    assert_eq!(rm.master.r, vec![Rational::from(1), Rational::from(2)]);
    let has = |i: usize, l: [u32; 2], j: [u32; 2]| rm.gamma[i].iter().any(|g| g.l == l && g.j == j && g.coeff.norm() > 1e-6);
    assert!(has(0, [0, 1], [1, 0]));
    assert!(has(1, [2, 0], [0, 0]));
    assert!(invariance_residual(&sys, &rm) < 1e-8);
}

#[test]
fn invariance_holds_at_higher_order() {
    let sys = example1();
    let rm = reduce(&sys, &[0, 1], 7, None);
    let res = invariance_residual(&sys, &rm);
    assert!(res < 1e-8, "{res}");
    let beam = assemble_first_order(&build_bernoulli_beam(4, 27.0, 60.0, 1.25e-4, 2.5e-5).unwrap()).unwrap();
    let rb = reduce(&beam, &[0, 1], 5, None);
    assert!(invariance_residual(&beam, &rb) < 1e-8);
}

#[test]
fn conjugate_pairing_and_realness() {
    let sys = example1();
    let rm = reduce(&sys, &[0, 1], 5, None);
    let t = &rm.table;
    for i in 0..t.len() {
        let k = t.exps(i);
        let is = t.find(&swapped(k, 2)).unwrap();
        assert!((&rm.w[is] - rm.w[i].map(|z| z.conj())).norm() < 1e-14);
    }
    let p = ReducedModel::p_from_cartesian(&[0.03, -0.02, 0.01, 0.015]);
    let z = rm.eval_w(&p);
    assert!(z.iter().all(|v| v.im.abs() < 1e-10));
}

#[test]
fn json_roundtrip() {
    let sys = example1();
    let mut rm = reduce(&sys, &[0, 1], 3, None);
    rm.solve_nonauto(&sys, &[0.9, 1.0]).unwrap();
    let back = ReducedModel::from_json(&rm.to_json().unwrap()).unwrap();
    assert_eq!(back.gamma, rm.gamma);
    assert_eq!(back.w, rm.w);
    assert_eq!(back.nonauto.len(), 2);
    assert!(back.nonauto_at(1.0).is_some());
}

#[test]
fn zero_forcing_gives_zero_nonauto() {
    let sys = assemble_first_order(&build_coupled_oscillators(0.005, 0.01, 0.3, 1.0, 0.0, 0.0).unwrap()).unwrap();
    let rm = reduce(&sys, &[0, 1], 3, Some(1.0));
    let na = leading_nonautonomous(&sys, &rm, 1.0).unwrap();
    assert!(na.x0.norm() == 0.0 && na.s0.iter().all(|s| s.norm() == 0.0));
}

#[test]
fn example1_forcing_projection_branches() {
    let sys = example1();
    let rm = reduce(&sys, &[0, 1], 3, None);
    let na = leading_nonautonomous(&sys, &rm, 1.0).unwrap();
    let want = hdot(&rm.master.u[0], &sys.f_a);
    assert!((na.s0[0] - want).norm() < 1e-12 && want.norm() > 0.1);
    assert_eq!(na.s0[1], c(0.0, 0.0));
    assert!((rm.f_mod[0] - want).norm() < 1e-14);
    assert_eq!(rm.f_mod[1], c(0.0, 0.0));
}

#[test]
fn off_resonant_single_mode_response() {
    let mech = MechSystem::new(
        DMatrix::identity(1, 1),
        DMatrix::zeros(1, 1),
        DMatrix::identity(1, 1),
        PolynomialForce::zero(2, 1),
        DVector::from_element(1, 1.0),
    )
    .unwrap();
    let sys = assemble_first_order(&mech).unwrap();
    let rm = reduce(&sys, &[0], 3, Some(2.0));
    let na = leading_nonautonomous(&sys, &rm, 2.0).unwrap();
    assert_eq!(na.s0[0], c(0.0, 0.0));
    assert!((2.0 * na.x0[0].norm() - 1.0 / 3.0).abs() < 1e-12);
    let orbit = linear_response(&sys, 2.0, 1.0, 64, 0.05).unwrap();
    assert!((orbit.traj.amplitude(0) - 1.0 / 3.0).abs() < 1e-12);
    let zero = linear_response(&sys, 2.0, 0.0, 16, 0.05).unwrap();
    assert_eq!(zero.traj.amplitude(0), 0.0);
    assert!(linear_response(&sys, 1.01, 1.0, 16, 0.05).is_err());
}
