//! Leading-order reduced vector fields in the frame rotating with `r_i Omega`.
//!
//! Cartesian state is interleaved `(x_1, y_1, ..., x_m, y_m)` with
//! `q_i = (x_i + i y_i) e^{i r_i Omega t}`; polar state is `(rho_1, theta_1, ...)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::ssm::{GammaTerm, ReducedModel};

pub const RHO_MIN: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Rom {
    pub lambda: Vec<Complex64>,
    pub r: Vec<f64>,
    pub r_d: f64,
    pub gamma: Vec<Vec<GammaTerm>>,
    pub f: Vec<Complex64>,
    max_pow: u32,
}

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl Rom {
    pub fn new(rm: &ReducedModel) -> Self {
        Self::from_parts(rm.master.lambda.clone(), rm.master.r_f64(), rm.master.r_d_f64(), rm.gamma.clone(), rm.f_mod.clone())
    }

    pub fn from_parts(lambda: Vec<Complex64>, r: Vec<f64>, r_d: f64, gamma: Vec<Vec<GammaTerm>>, f: Vec<Complex64>) -> Self {
        let max_pow = gamma.iter().flatten().flat_map(|g| g.l.iter().chain(g.j.iter())).copied().max().unwrap_or(0);
        Self { lambda, r, r_d, gamma, f, max_pow }
    }

    pub fn m(&self) -> usize {
        self.lambda.len()
    }

    pub fn dim_state(&self) -> usize {
        2 * self.lambda.len()
    }

    fn q_of(&self, xy: &[f64]) -> Vec<Complex64> {
        (0..self.m()).map(|i| Complex64::new(xy[2 * i], xy[2 * i + 1])).collect()
    }

    /// `pow[s][e] = q_s^e`, `powc[s][e] = conj(q_s)^e`.
    fn powers(&self, q: &[Complex64]) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
        let n = self.max_pow as usize + 1;
        let mk = |z: Complex64| {
            let mut v = vec![Complex64::new(1.0, 0.0); n];
            for e in 1..n {
                v[e] = v[e - 1] * z;
            }
            v
        };
        (q.iter().map(|&z| mk(z)).collect(), q.iter().map(|&z| mk(z.conj())).collect())
    }

    fn monomial(g: &GammaTerm, pw: &[Vec<Complex64>], pc: &[Vec<Complex64>]) -> Complex64 {
        g.l.iter().zip(&g.j).enumerate().fold(Complex64::new(1.0, 0.0), |acc, (s, (&l, &j))| {
            acc * pw[s][l as usize] * pc[s][j as usize]
        })
    }

    /// Nonlinear part `G_i(q) = sum gamma q^l conj(q)^j` per mode.
    pub fn nonlinear(&self, q: &[Complex64]) -> Vec<Complex64> {
        let (pw, pc) = self.powers(q);
        self.gamma.iter().map(|gs| gs.iter().map(|g| g.coeff * Self::monomial(g, &pw, &pc)).sum()).collect()
    }

    pub fn cartesian_vf(&self, xy: &[f64], omega: f64, eps: f64) -> DVector<f64> {
        let q = self.q_of(xy);
        let g = self.nonlinear(&q);
        let mut out = DVector::zeros(2 * self.m());
        for i in 0..self.m() {
            let (x, y) = (xy[2 * i], xy[2 * i + 1]);
            let lr = self.lambda[i].re;
            let det = self.lambda[i].im - self.r[i] * omega;
            out[2 * i] = lr * x - det * y + g[i].re + eps * self.f[i].re;
            out[2 * i + 1] = det * x + lr * y + g[i].im + eps * self.f[i].im;
        }
        out
    }

    pub fn cartesian_jacobian(&self, xy: &[f64], omega: f64) -> DMatrix<f64> {
        let m = self.m();
        let q = self.q_of(xy);
        let (pw, pc) = self.powers(&q);
        let mut jac = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            let lr = self.lambda[i].re;
            let det = self.lambda[i].im - self.r[i] * omega;
            jac[(2 * i, 2 * i)] = lr;
            jac[(2 * i, 2 * i + 1)] = -det;
            jac[(2 * i + 1, 2 * i)] = det;
            jac[(2 * i + 1, 2 * i + 1)] = lr;
            for g in &self.gamma[i] {
                for s in 0..m {
                    let (l, j) = (g.l[s], g.j[s]);
                    if l == 0 && j == 0 {
                        continue;
                    }
                    let others = (0..m).filter(|&t| t != s).fold(g.coeff, |acc, t| {
                        acc * pw[t][g.l[t] as usize] * pc[t][g.j[t] as usize]
                    });
                    let dq = if l > 0 { pw[s][l as usize - 1] * pc[s][j as usize] * l as f64 } else { czero() };
                    let dqc = if j > 0 { pw[s][l as usize] * pc[s][j as usize - 1] * j as f64 } else { czero() };
                    let dx = others * (dq + dqc);
                    let dy = others * (dq - dqc) * Complex64::new(0.0, 1.0);
                    jac[(2 * i, 2 * s)] += dx.re;
                    jac[(2 * i + 1, 2 * s)] += dx.im;
                    jac[(2 * i, 2 * s + 1)] += dy.re;
                    jac[(2 * i + 1, 2 * s + 1)] += dy.im;
                }
            }
        }
        jac
    }

    /// Columns `d/dOmega` and `d/deps` of the Cartesian field.
    pub fn param_derivatives(&self, xy: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::zeros(2 * m, 2);
        for i in 0..m {
            out[(2 * i, 0)] = self.r[i] * xy[2 * i + 1];
            out[(2 * i + 1, 0)] = -self.r[i] * xy[2 * i];
            out[(2 * i, 1)] = self.f[i].re;
            out[(2 * i + 1, 1)] = self.f[i].im;
        }
        out
    }

    pub fn polar_vf(&self, rt: &[f64], omega: f64, eps: f64) -> Result<DVector<f64>> {
        let m = self.m();
        for i in 0..m {
            if !(rt[2 * i] > RHO_MIN) {
                return Err(Error::PolarSingularity { mode: i, rho: rt[2 * i], rho_min: RHO_MIN });
            }
        }
        let rho: Vec<f64> = (0..m).map(|i| rt[2 * i]).collect();
        let theta: Vec<f64> = (0..m).map(|i| rt[2 * i + 1]).collect();
        let mut out = DVector::zeros(2 * m);
        for i in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for g in &self.gamma[i] {
                let mut mag = 1.0;
                let mut phase = -theta[i];
                for s in 0..m {
                    mag *= rho[s].powi((g.l[s] + g.j[s]) as i32);
                    phase += (g.l[s] as f64 - g.j[s] as f64) * theta[s];
                }
                acc += g.coeff * Complex64::from_polar(mag, phase);
            }
            let forcing = self.f[i] * Complex64::from_polar(1.0, -theta[i]) * eps;
            out[2 * i] = self.lambda[i].re * rho[i] + acc.re + forcing.re;
            out[2 * i + 1] = self.lambda[i].im - self.r[i] * omega + (acc.im + forcing.im) / rho[i];
        }
        Ok(out)
    }

    /// Both halves of the complex field in the rotating frame, evaluated independently.
    pub fn complex_vf(&self, p: &[Complex64], omega: f64, eps: f64) -> Vec<Complex64> {
        let m = self.m();
        let q = &p[..m];
        let qc = &p[m..];
        let mut out = vec![czero(); 2 * m];
        for i in 0..m {
            let rate = self.lambda[i] - Complex64::new(0.0, self.r[i] * omega);
            let mut a = rate * q[i] + self.f[i] * eps;
            let mut b = rate.conj() * qc[i] + self.f[i].conj() * eps;
            for g in &self.gamma[i] {
                let mut mono = g.coeff;
                let mut monoc = g.coeff.conj();
                for s in 0..m {
                    mono *= q[s].powu(g.l[s]) * qc[s].powu(g.j[s]);
                    monoc *= qc[s].powu(g.l[s]) * q[s].powu(g.j[s]);
                }
                a += mono;
                b += monoc;
            }
            out[i] = a;
            out[m + i] = b;
        }
        out
    }
}

pub fn polar_to_cartesian(rt: &[f64]) -> Vec<f64> {
    rt.chunks(2).flat_map(|c| [c[0] * c[1].cos(), c[0] * c[1].sin()]).collect()
}

pub fn cartesian_to_polar(xy: &[f64]) -> Vec<f64> {
    xy.chunks(2).flat_map(|c| [c[0].hypot(c[1]), c[1].atan2(c[0]).rem_euclid(2.0 * std::f64::consts::PI)]).collect()
}

/// Parameters `[Omega, eps]`.
impl Dynamics for Rom {
    fn dim(&self) -> usize {
        2 * self.m()
    }

    fn n_params(&self) -> usize {
        2
    }

    fn rhs(&self, _t: f64, x: &DVector<f64>, p: &[f64]) -> DVector<f64> {
        self.cartesian_vf(x.as_slice(), p[0], p[1])
    }

    fn jac_x(&self, _t: f64, x: &DVector<f64>, p: &[f64]) -> DMatrix<f64> {
        self.cartesian_jacobian(x.as_slice(), p[0])
    }

    fn jac_p(&self, _t: f64, x: &DVector<f64>, _p: &[f64]) -> DMatrix<f64> {
        self.param_derivatives(x.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::fd_jacobian;
    use crate::model::{assemble_first_order, build_coupled_oscillators};
    use crate::spectral::{eig_pair, MasterSubspace, ResonanceSettings};
    use crate::ssm::expand_autonomous;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single(gamma: Vec<GammaTerm>, f: Complex64) -> Rom {
        Rom::from_parts(vec![c(-0.01, 1.0)], vec![1.0], 1.0, vec![gamma], vec![f])
    }

    fn example1_rom(order: u32) -> Rom {
        let sys = assemble_first_order(&build_coupled_oscillators(0.005, 0.01, 0.3, 1.0, 1.0, 0.0).unwrap()).unwrap();
        let sp = eig_pair(&sys, 4).unwrap();
        let master = MasterSubspace::new(&sys, &sp, &[0, 1], ResonanceSettings::default(), None).unwrap();
        Rom::new(&expand_autonomous(&sys, &master, order).unwrap())
    }

    #[test]
    fn polar_linear_only() {
        let rom = single(vec![], c(0.0, 0.0));
        let v = rom.polar_vf(&[1.0, 0.0], 1.0, 0.0).unwrap();
        assert!((v[0] + 0.01).abs() < 1e-15 && v[1].abs() < 1e-15);
    }

    #[test]
    fn polar_forcing_pattern() {
        let rom = single(vec![], c(0.7, 0.0));
        let (rho, th, eps) = (0.5, 0.3_f64, 0.02);
        let v = rom.polar_vf(&[rho, th], 1.0, eps).unwrap();
        assert!((v[0] - (-0.01 * rho + eps * 0.7 * th.cos())).abs() < 1e-15);
        assert!((v[1] - eps / rho * (-th.sin() * 0.7)).abs() < 1e-15);
        assert!(matches!(rom.polar_vf(&[1e-9, 0.0], 1.0, 0.0), Err(Error::PolarSingularity { .. })));
    }

    #[test]
    fn cartesian_cubic_arithmetic() {
        let rom = single(vec![GammaTerm { l: vec![2], j: vec![1], coeff: c(1.0, 0.0) }], c(0.0, 0.0));
        let v = rom.cartesian_vf(&[1.0, 0.0], 1.0, 0.0);
        assert!((v[0] - 0.99).abs() < 1e-15 && v[1].abs() < 1e-15);
    }

    #[test]
    fn linearization_at_origin() {
        let rom = example1_rom(3);
        let om = 0.93;
        let j = rom.cartesian_jacobian(&[0.0; 4], om);
        let ev = j.complex_eigenvalues();
        for i in 0..2 {
            let want = c(rom.lambda[i].re, rom.lambda[i].im - rom.r[i] * om);
            assert!(ev.iter().any(|e| (e - want).norm() < 1e-12));
            assert!(ev.iter().any(|e| (e - want.conj()).norm() < 1e-12));
        }
    }

    #[test]
    fn polar_equals_cartesian_pushforward() {
        let rom = example1_rom(5);
        let rt = [0.04, 0.7, 0.03, -1.9];
        let (om, eps) = (0.97, 0.01);
        let pv = rom.polar_vf(&rt, om, eps).unwrap();
        let xy = polar_to_cartesian(&rt);
        let cv = rom.cartesian_vf(&xy, om, eps);
        for i in 0..2 {
            let (r, th) = (rt[2 * i], rt[2 * i + 1]);
            let dx = pv[2 * i] * th.cos() - r * pv[2 * i + 1] * th.sin();
            let dy = pv[2 * i] * th.sin() + r * pv[2 * i + 1] * th.cos();
            assert!((dx - cv[2 * i]).abs() < 1e-12 && (dy - cv[2 * i + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let rom = example1_rom(7);
        let xy = DVector::from_vec(vec![0.05, -0.02, 0.03, 0.04]);
        let (om, eps) = (1.02, 0.01);
        let fd = fd_jacobian(|x| rom.cartesian_vf(x.as_slice(), om, eps), &xy, 1e-6);
        let an = rom.cartesian_jacobian(xy.as_slice(), om);
        assert!((&fd - &an).norm() <= 1e-7 * an.norm());
        let pd = rom.param_derivatives(xy.as_slice());
        let h = 1e-6;
        let d_om = (rom.cartesian_vf(xy.as_slice(), om + h, eps) - rom.cartesian_vf(xy.as_slice(), om - h, eps)) / (2.0 * h);
        let d_eps = (rom.cartesian_vf(xy.as_slice(), om, eps + h) - rom.cartesian_vf(xy.as_slice(), om, eps - h)) / (2.0 * h);
        assert!((d_om - pd.column(0)).norm() <= 1e-7 * pd.column(0).norm());
        assert!((d_eps - pd.column(1)).norm() <= 1e-7 * pd.column(1).norm());
    }

    #[test]
    fn complex_field_is_conjugate_symmetric() {
        let rom = example1_rom(5);
        let q = [c(0.03, 0.01), c(-0.02, 0.04)];
        let p = [q[0], q[1], q[0].conj(), q[1].conj()];
        let v = rom.complex_vf(&p, 0.99, 0.01);
        for i in 0..2 {
            assert!((v[i].conj() - v[2 + i]).norm() < 1e-15);
        }
        let cart = rom.cartesian_vf(&[0.03, 0.01, -0.02, 0.04], 0.99, 0.01);
        assert!((v[1].re - cart[2]).abs() < 1e-15 && (v[1].im - cart[3]).abs() < 1e-15);
    }
}
