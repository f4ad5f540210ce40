use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::*;

/// Autonomous field given by closures, parameters `p`.
struct Field<F, J> {
    n: usize,
    np: usize,
    f: F,
    j: J,
}

impl<F, J> Dynamics for Field<F, J>
where
    F: Fn(&DVector<f64>, &[f64]) -> DVector<f64> + Sync,
    J: Fn(&DVector<f64>, &[f64]) -> DMatrix<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }
    fn n_params(&self) -> usize {
        self.np
    }
    fn rhs(&self, _t: f64, x: &DVector<f64>, p: &[f64]) -> DVector<f64> {
        (self.f)(x, p)
    }
    fn jac_x(&self, _t: f64, x: &DVector<f64>, p: &[f64]) -> DMatrix<f64> {
        (self.j)(x, p)
    }
}

/// `r' = mu r + s r^3`, `theta' = 1` in Cartesian form; `s = -1` supercritical.
fn hopf(s: f64) -> impl Dynamics {
    Field {
        n: 2,
        np: 1,
        f: move |x: &DVector<f64>, p: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            DVector::from_vec(vec![p[0] * x[0] - x[1] + s * x[0] * r2, x[0] + p[0] * x[1] + s * x[1] * r2])
        },
        j: move |x: &DVector<f64>, p: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let r2 = a * a + b * b;
            DMatrix::from_row_slice(2, 2, &[
                p[0] + s * (r2 + 2.0 * a * a),
                -1.0 + s * 2.0 * a * b,
                1.0 + s * 2.0 * a * b,
                p[0] + s * (r2 + 2.0 * b * b),
            ])
        },
    }
}

fn circle(mesh: Mesh, r: f64, p: Vec<f64>) -> PoSeed {
    PoSeed::from_fn(mesh, 2.0 * PI, p, |t| DVector::from_vec(vec![r * (2.0 * PI * t).cos(), r * (2.0 * PI * t).sin()]))
}

#[test]
fn harmonic_oscillator_family() {
    let f = Field {
        n: 2,
        np: 1,
        f: |x: &DVector<f64>, _p: &[f64]| DVector::from_vec(vec![-x[1], x[0]]),
        j: |_x: &DVector<f64>, _p: &[f64]| DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
    };
    let mut seed = circle(Mesh::default(), 1.0, vec![0.0]);
    seed.period = 6.0;
    for v in seed.x.iter_mut() {
        v[0] *= 1.05;
    }
    let po = collocate_po(&f, &seed).unwrap();
    assert!((po.period - 2.0 * PI).abs() < 1e-8);
    let r0 = DVector::from_column_slice(&po.x[0]).norm();
    for x in &po.x {
        assert!((DVector::from_column_slice(x).norm() - r0).abs() < 1e-6);
    }
    // Center: both multipliers are 1.
    assert!(po.multipliers.iter().all(|m| (m - 1.0).norm() < 1e-6));
}

#[test]
fn hopf_cycle_radius_and_multiplier() {
    let mu = 0.04;
    let po = collocate_po(&hopf(-1.0), &circle(Mesh::default(), 0.25, vec![mu])).unwrap();
    let r = DVector::from_column_slice(&po.x[3]).norm();
    assert!((r - mu.sqrt()).abs() < 0.01 * mu.sqrt());
    assert!((po.period - 2.0 * PI).abs() < 1e-6);
    let mut m: Vec<f64> = po.multipliers.iter().map(|z| z.norm()).collect();
    m.sort_by(f64::total_cmp);
    assert!((m[1] - 1.0).abs() < 1e-6);
    assert!((m[0] - (-2.0 * mu * po.period).exp()).abs() < 1e-4);
    assert!(po.stable);
    assert!((po.size - r).abs() < 1e-6);
}

/// Period by integrating the van der Pol oscillator between upward zero crossings of x.
fn vdp_period_oracle() -> f64 {
    let f = |x: [f64; 2]| [x[1], (1.0 - x[0] * x[0]) * x[1] - x[0]];
    let h = 1e-4;
    let mut x = [2.0, 0.0];
    let mut t = 0.0;
    let mut crossings = Vec::new();
    while crossings.len() < 12 {
        let k1 = f(x);
        let k2 = f([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
        let k3 = f([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
        let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]]);
        let xn = [
            x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if x[0] < 0.0 && xn[0] >= 0.0 {
            crossings.push(t + h * (-x[0]) / (xn[0] - x[0]));
        }
        x = xn;
        t += h;
    }
    (crossings[11] - crossings[6]) / 5.0
}

#[test]
fn van_der_pol_period() {
    let f = Field {
        n: 2,
        np: 1,
        f: |x: &DVector<f64>, p: &[f64]| DVector::from_vec(vec![x[1], p[0] * (1.0 - x[0] * x[0]) * x[1] - x[0]]),
        j: |x: &DVector<f64>, p: &[f64]| {
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0 * p[0] * x[0] * x[1] - 1.0, p[0] * (1.0 - x[0] * x[0])])
        },
    };
    let mesh = Mesh { intervals: 40, degree: 4 };
    let seed = PoSeed::from_fn(mesh, 6.5, vec![1.0], |t| {
        DVector::from_vec(vec![2.0 * (2.0 * PI * t).cos(), -2.0 * (2.0 * PI * t).sin()])
    });
    let po = collocate_po(&f, &seed).unwrap();
    let oracle = vdp_period_oracle();
    assert!((po.period - oracle).abs() < 1e-4 * oracle, "{} vs {oracle}", po.period);
    assert!((po.period - 6.6633).abs() < 1e-3);
}

#[test]
fn constant_coefficient_multipliers() {
    let a = DMatrix::from_row_slice(3, 3, &[-0.3, 1.2, 0.0, -1.2, -0.3, 0.0, 0.0, 0.0, 0.4]);
    let a2 = a.clone();
    let f = Field { n: 3, np: 1, f: move |x: &DVector<f64>, _p: &[f64]| &a * x, j: move |_x: &DVector<f64>, _p: &[f64]| a2.clone() };
    let t = 2.5;
    let mesh = Mesh::default();
    let po = PoSolution {
        mesh,
        x: vec![vec![0.0; 3]; mesh.n_points()],
        period: t,
        params: vec![0.0],
        multipliers: vec![],
        stable: true,
        size: 0.0,
        mean: vec![0.0; 3],
        autonomous: true,
    };
    let mu = floquet(&po, &f).unwrap();
    let mut expect = [Complex64::new(-0.3, 1.2), Complex64::new(-0.3, -1.2), Complex64::new(0.4, 0.0)].map(|l| (l * t).exp()).to_vec();
    for m in &mu {
        let k = (0..expect.len()).min_by(|&i, &j| (expect[i] - m).norm().total_cmp(&(expect[j] - m).norm())).unwrap();
        assert!((expect[k] - m).norm() < 1e-8 * expect[k].norm(), "{m} vs {}", expect[k]);
        expect.remove(k);
    }
}

#[test]
fn test_function_arithmetic() {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let (sn, pd, tr) = po_test_functions(&[c(0.5, 0.0), c(2.0, 0.0)], false, 0).unwrap();
    assert!((sn + 0.5).abs() < 1e-15 && (pd - 4.5).abs() < 1e-15 && (tr - 0.0).abs() < 1e-15);
    let z = Complex64::from_polar(0.9, PI / 3.0);
    let (_, _, tr) = po_test_functions(&[z, z.conj()], false, 0).unwrap();
    assert!((tr + 0.19).abs() < 1e-12);
    // Single multiplier: no pairs.
    assert_eq!(po_test_functions(&[c(0.3, 0.0)], false, 0).unwrap().2, 1.0);
    // Autonomous: the trivial multiplier is dropped once.
    let (sn, _, _) = po_test_functions(&[c(1.0, 0.0), c(0.5, 0.0)], true, 0).unwrap();
    assert!((sn + 0.5).abs() < 1e-15);
    assert!(po_test_functions(&[c(0.5, 0.0)], false, 2).is_err());
}

#[test]
fn subset_keeps_sign_where_full_product_underflows() {
    let c = |re: f64| Complex64::new(re, 0.0);
    let mut base: Vec<Complex64> = (0..157).map(|k| c(1e-3 * (1.0 + k as f64 / 157.0))).collect();
    base.extend([c(1e-300), c(0.2)]);
    let before: Vec<Complex64> = base.iter().copied().chain([c(0.99)]).collect();
    let after: Vec<Complex64> = base.iter().copied().chain([c(1.01)]).collect();
    let full = |m: &[Complex64]| po_test_functions(m, false, 0).unwrap().2;
    let sub = |m: &[Complex64]| po_test_functions(m, false, 3).unwrap().0;
    // Products of many factors near -1 and tiny ones lose the information.
    assert!(full(&before).abs() < 1e-300 || full(&before).signum() == full(&after).signum());
    assert!(sub(&before) * sub(&after) < 0.0);
}

#[test]
fn size_measure() {
    let mesh = Mesh { intervals: 20, degree: 4 };
    let a = 0.7;
    let seed = PoSeed::from_fn(mesh, 3.0, vec![0.0], |t| DVector::from_vec(vec![a * (2.0 * PI * t).sin() + 2.0, -1.0]));
    let po = PoSolution {
        mesh,
        x: seed.x.iter().map(|v| v.as_slice().to_vec()).collect(),
        period: 3.0,
        params: vec![0.0],
        multipliers: vec![],
        stable: true,
        size: 0.0,
        mean: vec![],
        autonomous: true,
    };
    assert!((po_size(&po) - a / 2f64.sqrt()).abs() < 1e-7);
    let mut shifted = po.clone();
    shifted.x.rotate_left(7);
    assert!((po_size(&shifted) - po_size(&po)).abs() < 1e-12);
    let mut flat = po.clone();
    flat.x = vec![vec![1.0, 2.0]; mesh.n_points()];
    assert!(po_size(&flat) < 1e-12);
}

#[test]
fn hopf_branch_from_switch() {
    let f = hopf(-1.0);
    let opts = PoOptions::default();
    let seed = hb_switch(&f, &[0.0, 0.0], &[0.0], opts.hopf_delta, Mesh::default()).unwrap();
    assert!((seed.period - 2.0 * PI).abs() < 1e-12);
    let br = continue_po(&f, &seed, 0, (-0.1, 0.25), &opts).unwrap();
    assert_eq!(br.status, crate::cont::BranchStatus::WindowExit);
    let last = br.points.last().unwrap();
    assert!((last.params[0] - 0.25).abs() < 1e-9);
    for po in &br.points[1..] {
        assert!((po.size - po.params[0].sqrt()).abs() < 1e-6 * (1.0 + po.size), "{} {}", po.size, po.params[0]);
        assert!((po.period - 2.0 * PI).abs() < 1e-6);
        assert!(po.stable);
    }
}

#[test]
fn subcritical_hopf_branch_goes_backwards() {
    let f = hopf(1.0);
    let opts = PoOptions::default();
    let seed = hb_switch(&f, &[0.0, 0.0], &[0.0], opts.hopf_delta, Mesh::default()).unwrap();
    let br = continue_po(&f, &seed, 0, (-0.2, 0.1), &opts).unwrap();
    let last = br.points.last().unwrap();
    assert!((last.params[0] + 0.2).abs() < 1e-9);
    assert!(br.points[1..].iter().all(|p| !p.stable && p.params[0] < 0.0));
}

/// Supercritical Hopf oscillator at `mu = 1` times a linear block in a frame rotating at
/// half speed, `diag(alpha, -1)`: one real multiplier `-e^{2 pi alpha}` crosses -1 at `alpha = 0`.
fn pd_field() -> impl Dynamics {
    Field {
        n: 4,
        np: 1,
        f: |x: &DVector<f64>, p: &[f64]| {
            let (a, b, u, v) = (x[0], x[1], x[2], x[3]);
            let r2 = a * a + b * b;
            let al = p[0];
            DVector::from_vec(vec![
                a - b - a * r2,
                a + b - b * r2,
                -v / 2.0 + (al - 1.0) / 2.0 * u + (al + 1.0) / 2.0 * (a * u + b * v),
                u / 2.0 + (al - 1.0) / 2.0 * v + (al + 1.0) / 2.0 * (b * u - a * v),
            ])
        },
        j: |x: &DVector<f64>, p: &[f64]| {
            let (a, b, u, v) = (x[0], x[1], x[2], x[3]);
            let al = p[0];
            let k = (al + 1.0) / 2.0;
            let h = (al - 1.0) / 2.0;
            DMatrix::from_row_slice(4, 4, &[
                1.0 - 3.0 * a * a - b * b, -1.0 - 2.0 * a * b, 0.0, 0.0,
                1.0 - 2.0 * a * b, 1.0 - a * a - 3.0 * b * b, 0.0, 0.0,
                k * u, k * v, h + k * a, -0.5 + k * b,
                k * v, -k * u, 0.5 + k * b, h - k * a,
            ])
        },
    }
}

#[test]
fn period_doubling_bracketed() {
    let f = pd_field();
    let mesh = Mesh::default();
    let seed = PoSeed::from_fn(mesh, 2.0 * PI, vec![-0.2], |t| {
        DVector::from_vec(vec![(2.0 * PI * t).cos(), (2.0 * PI * t).sin(), 0.0, 0.0])
    });
    let opts = PoOptions { settings: ContinuationSettings { h0: 0.01, ..Default::default() }, ..Default::default() };
    let br = continue_po(&f, &seed, 0, (-0.2, 0.2), &opts).unwrap();
    let pd: Vec<_> = br.events_of(EventKind::PD).collect();
    assert_eq!(pd.len(), 1);
    assert!(pd[0].point.params[0].abs() < 1e-8);
    assert_eq!(br.count(EventKind::SN) + br.count(EventKind::TR), 0);
    // Multipliers on either side: a real one crosses -1.
    let before = &br.points[pd[0].index - 1];
    let after = &br.points[pd[0].index];
    let near = |po: &PoSolution| po.multipliers.iter().filter(|m| m.im.abs() < 1e-9).map(|m| m.re).min_by(|a, b| (a + 1.0).abs().total_cmp(&(b + 1.0).abs())).unwrap();
    assert!(near(before) > -1.0 && near(after) < -1.0);
}

/// Hopf oscillator plus an uncoupled focus `(alpha +- 0.3 i)`: torus crossing at `alpha = 0`.
#[test]
fn torus_crossing_bracketed() {
    let f = Field {
        n: 4,
        np: 1,
        f: |x: &DVector<f64>, p: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            DVector::from_vec(vec![
                x[0] - x[1] - x[0] * r2,
                x[0] + x[1] - x[1] * r2,
                p[0] * x[2] - 0.3 * x[3],
                0.3 * x[2] + p[0] * x[3],
            ])
        },
        j: |x: &DVector<f64>, p: &[f64]| {
            let (a, b) = (x[0], x[1]);
            DMatrix::from_row_slice(4, 4, &[
                1.0 - 3.0 * a * a - b * b, -1.0 - 2.0 * a * b, 0.0, 0.0,
                1.0 - 2.0 * a * b, 1.0 - a * a - 3.0 * b * b, 0.0, 0.0,
                0.0, 0.0, p[0], -0.3,
                0.0, 0.0, 0.3, p[0],
            ])
        },
    };
    let seed = PoSeed::from_fn(Mesh::default(), 2.0 * PI, vec![-0.1], |t| {
        DVector::from_vec(vec![(2.0 * PI * t).cos(), (2.0 * PI * t).sin(), 0.0, 0.0])
    });
    let opts = PoOptions { settings: ContinuationSettings { h0: 0.01, ..Default::default() }, ..Default::default() };
    let br = continue_po(&f, &seed, 0, (-0.1, 0.1), &opts).unwrap();
    let tr: Vec<_> = br.events_of(EventKind::TR).collect();
    assert_eq!(tr.len(), 1);
    assert!(tr[0].point.params[0].abs() < 1e-8);
    assert!(br.points[0].stable && !br.points.last().unwrap().stable);
}

/// `r' = mu r + r^3 - r^5`: cycles fold at `mu = -1/4`, `r^2 = 1/2`.
#[test]
fn cycle_fold_bracketed() {
    let f = Field {
        n: 2,
        np: 1,
        f: |x: &DVector<f64>, p: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let g = p[0] + r2 - r2 * r2;
            DVector::from_vec(vec![g * x[0] - x[1], x[0] + g * x[1]])
        },
        j: |x: &DVector<f64>, p: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let r2 = a * a + b * b;
            let g = p[0] + r2 - r2 * r2;
            let dg = 1.0 - 2.0 * r2;
            DMatrix::from_row_slice(2, 2, &[g + 2.0 * a * a * dg, -1.0 + 2.0 * a * b * dg, 1.0 + 2.0 * a * b * dg, g + 2.0 * b * b * dg])
        },
    };
    let r = 0.9f64;
    let mu0 = -(r * r) + r.powi(4);
    let seed = circle(Mesh::default(), r, vec![mu0]);
    let opts = PoOptions { settings: ContinuationSettings { h0: 0.01, ..Default::default() }, ..Default::default() };
    let mut seed = seed;
    let mut dir = vec![0.0; 2 * Mesh::default().n_points() + 2];
    dir[2 * Mesh::default().n_points() + 1] = -1.0;
    seed.direction = Some(dir);
    let br = continue_po(&f, &seed, 0, (-0.3, 0.0), &opts).unwrap();
    let sn: Vec<_> = br.events_of(EventKind::SN).collect();
    assert_eq!(sn.len(), 1, "{:?}", br.events.iter().map(|e| (e.kind, e.point.params[0], e.point.size, e.point.period)).collect::<Vec<_>>());
    assert!((sn[0].point.params[0] + 0.25).abs() < 1e-6);
    assert!((sn[0].point.size - 0.5f64.sqrt()).abs() < 1e-4);
}

#[test]
fn example1_cycles_from_hb1_reach_hb2() {
    use crate::cont::{continue_equilibria, EventKind};
    let sys = crate::model::assemble_first_order(&crate::model::example1_oscillators()).unwrap();
    let rm = crate::ssm::reduce(&sys, &[0, 1], 3, Default::default(), None).unwrap();
    let rom = crate::rom::Rom::new(&rm);
    let eq = continue_equilibria(&rom, (0.7, 1.1), 0.01, &ContinuationSettings::default()).unwrap();
    let hb: Vec<_> = eq.events_of(EventKind::HB).collect();
    let opts = PoOptions::default();
    let seed = hb_switch(&rom, &hb[0].point.x, &[hb[0].point.omega, 0.01], opts.hopf_delta, Mesh::default()).unwrap();
    let br = continue_po(&rom, &seed, 0, (0.9, 1.05), &opts).unwrap();
    assert!(br.count(EventKind::SN) >= 2);
    assert!(br.count(EventKind::PD) >= 1);
    let last = br.points.last().unwrap();
    assert!(last.size < 1e-2);
    assert!((last.params[0] - hb[1].point.omega).abs() < 1e-3, "ends at {}", last.params[0]);
}
