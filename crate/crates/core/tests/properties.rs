use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

use ssm_core::lift::{classify_rotation, RotationKind};
use ssm_core::model::{assemble_first_order, build_coupled_oscillators, PolyTerm, PolynomialForce};
use ssm_core::rom::{cartesian_to_polar, polar_to_cartesian};
use ssm_core::tor2::rotation_operator;
use ssm_core::verify::select_tf;

fn curve(n_h: usize, coeffs: &[(f64, f64)]) -> Vec<DVector<f64>> {
    let n = 2 * n_h + 1;
    (0..n)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / n as f64;
            let v: f64 = coeffs.iter().enumerate().map(|(k, (a, b))| a * (k as f64 * th).cos() + b * (k as f64 * th).sin()).sum();
            DVector::from_vec(vec![v, th.sin()])
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotations_compose(rho1 in -1.0..1.0f64, rho2 in -1.0..1.0f64,
                         coeffs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..5)) {
        let pts = curve(6, &coeffs);
        let twice = rotation_operator(&rotation_operator(&pts, rho1).unwrap(), rho2).unwrap();
        let once = rotation_operator(&pts, rho1 + rho2).unwrap();
        for (a, b) in twice.iter().zip(&once) {
            prop_assert!((a - b).amax() < 1e-10);
        }
        let back = rotation_operator(&rotation_operator(&pts, rho1).unwrap(), -rho1).unwrap();
        for (a, b) in back.iter().zip(&pts) {
            prop_assert!((a - b).amax() < 1e-10);
        }
    }

    #[test]
    fn polar_chart_round_trips(r in 1e-6..10.0f64, th in -PI..PI) {
        let xy = polar_to_cartesian(&[r, th]);
        let rt = cartesian_to_polar(&xy);
        assert_relative_eq!(rt[0], r, max_relative = 1e-12);
        assert_relative_eq!(xy[0], r * th.cos(), epsilon = 1e-12 * r);
        let back = polar_to_cartesian(&rt);
        assert_relative_eq!(back[1], xy[1], epsilon = 1e-12 * r);
    }

    #[test]
    fn rational_rotation_numbers_are_recognized(p in 1i64..40, q in 1u64..40, omega in 0.5..2.0f64) {
        let rho = p as f64 / q as f64;
        let t_s = 2.0 * PI / (rho * omega);
        let (got, kind) = classify_rotation(t_s, omega, 1.0, 100);
        assert_relative_eq!(got, rho, max_relative = 1e-12);
        match kind {
            RotationKind::Periodic { m1, m_p } => prop_assert_eq!(m1 as f64 / m_p as f64, rho),
            RotationKind::Quasiperiodic => prop_assert!(false, "{p}/{q} classed as quasi-periodic"),
        }
    }

    #[test]
    fn polynomial_jacobian_matches_differences(z in prop::collection::vec(-1.5..1.5f64, 4), c in -2.0..2.0f64) {
        let f = PolynomialForce::new(4, 2, vec![
            PolyTerm { coeff: c, output: 0, factors: vec![(0, 2), (3, 1)] },
            PolyTerm { coeff: 1.0, output: 1, factors: vec![(1, 3)] },
            PolyTerm { coeff: -0.5, output: 1, factors: vec![(0, 1), (2, 1)] },
        ]).unwrap();
        let z = DVector::from_vec(z);
        let j = f.jacobian(&z);
        let h = 1e-6;
        for k in 0..4 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[k] += h;
            zm[k] -= h;
            let fd = (f.eval(&zp) - f.eval(&zm)) / (2.0 * h);
            for i in 0..2 {
                prop_assert!((fd[i] - j[(i, k)]).abs() <= 1e-6 * (1.0 + j[(i, k)].abs()));
            }
        }
    }

    #[test]
    fn horizon_grows_as_the_tolerance_tightens(mu in 0.05..0.99f64, d in 1e-6..0.1f64) {
        let mags = [Complex64::new(mu, 0.0)];
        let loose = select_tf(0.1, &mags, d, 10_000, 1.0).unwrap();
        let tight = select_tf(0.1, &mags, d / 10.0, 10_000, 1.0).unwrap();
        prop_assert!(tight.m >= loose.m);
        prop_assert!(mu.powi(loose.m as i32) <= d * (1.0 + 1e-12));
    }
}

#[test]
fn first_order_form_doubles_the_dimension() {
    let sys = assemble_first_order(&build_coupled_oscillators(0.0, 0.0, 0.0, 0.0, 1.0, 0.0).unwrap()).unwrap();
    assert_eq!(sys.dim(), 4);
    assert!(build_coupled_oscillators(-0.1, 0.0, 0.0, 0.0, 1.0, 0.0).is_err());
}
