//! Eigenanalysis of the (A, B) pencil, master modes and resonance detection.

use std::cmp::Ordering;

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hdot, to_complex_mat, CMat, CVec};
use crate::model::FirstOrderSystem;

pub type Rational = num_rational::Ratio<i64>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    /// All eigenvalues: complex ones by |Im| ascending, then Re descending, positive Im
    /// first; real ones after them.
    pub eigenvalues: Vec<Complex64>,
    /// Right vectors for the leading `right.len()` eigenvalues.
    pub right: Vec<CVec>,
    /// Left vectors, `left[j]^H B right[j] = 1`.
    pub left: Vec<CVec>,
}

impl Spectrum {
    /// Indices of eigenvalues with positive imaginary part (one per mode pair).
    pub fn pair_indices(&self) -> Vec<usize> {
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, l)| l.im > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

fn is_real(l: &Complex64) -> bool {
    l.im.abs() <= 1e-12 * l.norm()
}

// Overdamped (real) eigenvalues go last: stiffness-proportional damping makes the
// stiff modes real and they would otherwise sort ahead of every oscillatory pair.
fn eig_order(a: &Complex64, b: &Complex64) -> Ordering {
    is_real(a)
        .cmp(&is_real(b))
        .then(a.im.abs().total_cmp(&b.im.abs()))
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

fn start_vector(n: usize, seed: usize) -> CVec {
    CVec::from_fn(n, |i, _| c(1.0 + ((i * 7 + seed * 13) % 11) as f64 * 0.1, 0.05 * ((i + seed) % 5) as f64))
}

fn inverse_iteration(op: &CMat, rhs_map: &CMat, start: CVec, iters: usize, what: &str) -> Result<CVec> {
    let lu = op.clone().lu();
    let mut v = start;
    for _ in 0..iters {
        let w = lu
            .solve(&(rhs_map * &v))
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Eigen(format!("inverse iteration failed for {what}")))?;
        let nrm = w.norm();
        if nrm == 0.0 {
            return Err(Error::Eigen(format!("inverse iteration collapsed for {what}")));
        }
        v = w / c(nrm, 0.0);
    }
    Ok(v)
}

fn argmax_abs(v: &CVec, range: std::ops::Range<usize>) -> usize {
    let mut best = range.start;
    for i in range {
        if v[i].norm() > v[best].norm() {
            best = i;
        }
    }
    best
}

/// Scale `v` so its displacement part is mass-normalized (or the whole vector
/// has unit norm without a mass matrix) with its largest component real positive.
fn normalize_right(v: &CVec, mass: Option<&DMatrix<f64>>) -> CVec {
    let (scale, pivot) = match mass {
        Some(m) => {
            let n = m.nrows();
            let x = v.rows(0, n).into_owned();
            let mx = to_complex_mat(m) * &x;
            let s = hdot(&x, &mx).re.abs().sqrt();
            (s, argmax_abs(v, 0..n))
        }
        None => (v.norm(), argmax_abs(v, 0..v.len())),
    };
    let ph = v[pivot] / v[pivot].norm();
    v / (ph * scale)
}

/// Leading `k` eigenpairs of `A v = lambda B v` with left vectors, binormalized.
pub fn eig_pair(sys: &FirstOrderSystem, k: usize) -> Result<Spectrum> {
    let n = sys.dim();
    if k > n {
        return Err(Error::InvalidInput(format!("requested {k} eigenpairs of a dimension-{n} pencil")));
    }
    let op = sys.b_inv() * &sys.a;
    let schur = Schur::try_new(op, 1e-14, 100 * n.max(10))
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let mut eigenvalues: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(eig_order);

    let a = to_complex_mat(&sys.a);
    let b = to_complex_mat(&sys.b);
    let bh = b.adjoint();
    let a_norm = sys.a.norm().max(1.0);
    let mut right: Vec<CVec> = Vec::with_capacity(k);
    let mut left: Vec<CVec> = Vec::with_capacity(k);
    let mut j = 0;
    while j < k {
        let lam = eigenvalues[j];
        // The conjugate partner reuses the conjugated pair.
        if lam.im < 0.0 && j > 0 && (eigenvalues[j - 1].conj() - lam).norm() <= 1e-9 * lam.norm().max(1.0) {
            if right.len() == j && eigenvalues[j - 1].im > 0.0 {
                eigenvalues[j] = eigenvalues[j - 1].conj();
                right.push(right[j - 1].map(|z| z.conj()));
                left.push(left[j - 1].map(|z| z.conj()));
                j += 1;
                continue;
            }
        }
        let (v, u, lam) = refine_pair(&a, &b, &bh, lam, j, &right, &left, sys.mass.as_ref())?;
        let res = (&a * &v - &b * &v * lam).norm();
        if res > 1e-8 * a_norm * v.norm() {
            return Err(Error::Eigen(format!("eigenpair {j} residual {res:e} too large")));
        }
        eigenvalues[j] = lam;
        right.push(v);
        left.push(u);
        j += 1;
    }
    Ok(Spectrum { eigenvalues, right, left })
}

#[allow(clippy::too_many_arguments)]
fn refine_pair(
    a: &CMat,
    b: &CMat,
    bh: &CMat,
    lam0: Complex64,
    seed: usize,
    prev_r: &[CVec],
    prev_l: &[CVec],
    mass: Option<&DMatrix<f64>>,
) -> Result<(CVec, CVec, Complex64)> {
    let n = a.nrows();
    let scale = lam0.norm().max(1.0);
    let mut lam = lam0;
    let mut v = start_vector(n, seed);
    let mut u = start_vector(n, seed + 1);
    for sweep in 0..2 {
        let shift = lam + c(1e-10, 1e-10) * scale;
        let op = a - b * shift;
        v = inverse_iteration(&op, b, v, if sweep == 0 { 3 } else { 1 }, "right vector")?;
        let op_h = op.adjoint();
        u = inverse_iteration(&op_h, bh, u, if sweep == 0 { 3 } else { 1 }, "left vector")?;
        // Deflate against earlier vectors sharing the eigenvalue.
        for (pr, pl) in prev_r.iter().zip(prev_l) {
            let pv = hdot(pl, &(b * &v));
            v -= pr * pv;
            let pu = hdot(&(b * pr), &u);
            u -= pl * pu.conj();
        }
        let ubv = hdot(&u, &(b * &v));
        if ubv.norm() < 1e-10 * u.norm() * v.norm() * b.norm().max(1.0) {
            return Err(Error::Eigen(format!("defective eigenvalue near {lam}")));
        }
        lam = hdot(&u, &(a * &v)) / ubv;
    }
    let v = normalize_right(&v, mass);
    let ubv = hdot(&u, &(b * &v));
    let u = u / ubv.conj();
    Ok((v, u, lam))
}

/// One resonant monomial `q^l qbar^j` in the reduced dynamics of a master mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantTerm {
    pub l: Vec<u32>,
    pub j: Vec<u32>,
    /// `lambda_i - l.lambda - j.conj(lambda)`.
    pub detuning: Complex64,
}

fn for_each_multi_index(m: usize, max_total: u32, f: &mut impl FnMut(&[u32])) {
    fn rec(idx: &mut Vec<u32>, pos: usize, left: u32, f: &mut impl FnMut(&[u32])) {
        if pos == idx.len() {
            f(idx);
            return;
        }
        for v in 0..=left {
            idx[pos] = v;
            rec(idx, pos + 1, left - v, f);
        }
        idx[pos] = 0;
    }
    let mut idx = vec![0; m];
    rec(&mut idx, 0, max_total, f);
}

/// All `(l, j)` with `2 <= |l| + |j| <= max_order` and
/// `|lambda_i - l.lambda - j.conj(lambda)| <= tol_rel |Im lambda_i|`.
pub fn detect_inner_resonances(lambda: &[Complex64], max_order: u32, tol_rel: f64) -> Result<Vec<Vec<ResonantTerm>>> {
    if lambda.is_empty() {
        return Err(Error::InvalidInput("no master eigenvalues".into()));
    }
    if max_order < 2 {
        return Err(Error::InvalidInput(format!("max_order must be >= 2, got {max_order}")));
    }
    let m = lambda.len();
    let mut out = vec![Vec::new(); m];
    for_each_multi_index(2 * m, max_order, &mut |k| {
        let total: u32 = k.iter().sum();
        if total < 2 {
            return;
        }
        let mut comb = c(0.0, 0.0);
        for s in 0..m {
            comb += lambda[s] * k[s] as f64 + lambda[s].conj() * k[m + s] as f64;
        }
        for i in 0..m {
            let d = lambda[i] - comb;
            if d.norm() <= tol_rel * lambda[i].im.abs() {
                out[i].push(ResonantTerm { l: k[..m].to_vec(), j: k[m..].to_vec(), detuning: d });
            }
        }
    });
    Ok(out)
}

pub fn rational_gcd(a: Rational, b: Rational) -> Rational {
    // For reduced fractions, gcd(p/q, r/s) = gcd(p, r) / lcm(q, s).
    Rational::new(a.numer().gcd(b.numer()), a.denom().lcm(b.denom()))
}

/// Smallest-denominator `r_i` with `|Im lambda_i - r_i Omega| <= tol_rel Omega`,
/// and the rational gcd `r_d` of all `r_i`.
pub fn detect_external_resonance(
    lambda: &[Complex64],
    omega: f64,
    tol_rel: f64,
    denominator_cap: i64,
) -> Result<(Vec<Rational>, Rational)> {
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!("Omega must be positive, got {omega}")));
    }
    let mut r = Vec::with_capacity(lambda.len());
    for (i, l) in lambda.iter().enumerate() {
        let w = l.im;
        let found = (1..=denominator_cap).find_map(|q| {
            let p = (w * q as f64 / omega).round() as i64;
            (p > 0 && (w - p as f64 / q as f64 * omega).abs() <= tol_rel * omega).then(|| Rational::new(p, q))
        });
        r.push(found.ok_or_else(|| {
            Error::Resonance(format!(
                "mode {i} (Im lambda = {w}) has no rational ratio to Omega = {omega} with denominator <= {denominator_cap}"
            ))
        })?);
    }
    let r_d = r.iter().skip(1).fold(r[0], |g, x| rational_gcd(g, *x));
    Ok((r, r_d))
}

/// `floor(min Re over the spectrum / max Re over the master set)`.
pub fn spectral_quotient(all: &[Complex64], master: &[Complex64]) -> Result<u64> {
    let max_master = master.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if !(max_master < 0.0) {
        return Err(Error::InvalidInput(format!(
            "master spectrum touches the imaginary axis (max Re = {max_master})"
        )));
    }
    let min_all = all.iter().map(|l| l.re).fold(f64::INFINITY, f64::min);
    Ok((min_all / max_master).floor() as u64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonresonanceReport {
    pub sigma: u64,
    /// Highest order actually scanned (`min(sigma, order_cap)`).
    pub order_checked: u64,
    /// `(outer eigenvalue index, per-master-mode counts n_i = a_i + b_i)`.
    pub violations: Vec<(usize, Vec<u32>)>,
}

/// Scan `sum_i n_i Re lambda_i = Re lambda_k` for outer eigenvalues with
/// `2 <= |n| <= min(sigma, order_cap)`. Since Re of conjugates coincide only
/// the per-mode sums `n_i` matter.
pub fn check_nonresonance(
    all: &[Complex64],
    master: &[Complex64],
    tol_rel: f64,
    order_cap: u64,
) -> Result<NonresonanceReport> {
    let sigma = spectral_quotient(all, master)?;
    let order = sigma.min(order_cap);
    let is_master = |l: &Complex64| {
        master.iter().any(|m| (m - l).norm() <= 1e-12 * m.norm().max(1.0) || (m.conj() - l).norm() <= 1e-12 * m.norm().max(1.0))
    };
    let outer: Vec<(usize, f64)> = all.iter().enumerate().filter(|(_, l)| !is_master(l)).map(|(i, l)| (i, l.re)).collect();
    let mut violations = Vec::new();
    if outer.is_empty() || order < 2 {
        return Ok(NonresonanceReport { sigma, order_checked: order, violations });
    }
    let min_outer = outer.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
    let re: Vec<f64> = master.iter().map(|l| l.re).collect();
    let m = re.len();
    let mut n = vec![0u32; m];
    fn rec(
        pos: usize,
        total: u64,
        sum: f64,
        n: &mut Vec<u32>,
        re: &[f64],
        order: u64,
        min_outer: f64,
        tol: f64,
        outer: &[(usize, f64)],
        out: &mut Vec<(usize, Vec<u32>)>,
    ) {
        if pos == re.len() {
            if total >= 2 {
                for &(k, rk) in outer {
                    if (sum - rk).abs() <= tol * rk.abs() {
                        out.push((k, n.clone()));
                    }
                }
            }
            return;
        }
        let mut v = 0u32;
        loop {
            let t = total + v as u64;
            let s = sum + v as f64 * re[pos];
            if t > order || s < min_outer * (1.0 + tol) {
                break;
            }
            n[pos] = v;
            rec(pos + 1, t, s, n, re, order, min_outer, tol, outer, out);
            v += 1;
        }
        n[pos] = 0;
    }
    rec(0, 0, 0.0, &mut n, &re, order, min_outer, tol_rel, &outer, &mut violations);
    violations.sort();
    Ok(NonresonanceReport { sigma, order_checked: order, violations })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResonanceSettings {
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub max_order: u32,
    pub denominator_cap: i64,
}

impl Default for ResonanceSettings {
    fn default() -> Self {
        Self { inner_tol: 0.05, outer_tol: 0.05, max_order: 3, denominator_cap: 10 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MasterSubspace {
    /// Indices into `Spectrum::eigenvalues` of the chosen positive-Im eigenvalues.
    pub indices: Vec<usize>,
    pub lambda: Vec<Complex64>,
    pub v: Vec<CVec>,
    pub u: Vec<CVec>,
    pub resonances: Vec<Vec<ResonantTerm>>,
    pub r: Vec<Rational>,
    pub r_d: Rational,
    /// Forcing frequency at which `r` was identified.
    pub omega_ref: f64,
    /// Full pencil spectrum, kept for small-divisor checks.
    pub spectrum: Vec<Complex64>,
    pub settings: ResonanceSettings,
}

impl MasterSubspace {
    /// Build the master subspace from mode pairs `modes` (0 = lowest pair).
    /// Without `omega_ref` the frequency of the most strongly forced master
    /// mode is used to identify `r`.
    pub fn new(
        sys: &FirstOrderSystem,
        spectrum: &Spectrum,
        modes: &[usize],
        settings: ResonanceSettings,
        omega_ref: Option<f64>,
    ) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidInput("no master modes selected".into()));
        }
        let pairs = spectrum.pair_indices();
        let mut indices = Vec::new();
        for &m in modes {
            let idx = *pairs
                .get(m)
                .ok_or_else(|| Error::InvalidInput(format!("mode pair {m} does not exist")))?;
            if idx >= spectrum.right.len() {
                return Err(Error::Missing(format!(
                    "eigenvectors for eigenvalue {idx}; compute at least {} pairs",
                    idx + 1
                )));
            }
            indices.push(idx);
        }
        let lambda: Vec<Complex64> = indices.iter().map(|&i| spectrum.eigenvalues[i]).collect();
        let v: Vec<CVec> = indices.iter().map(|&i| spectrum.right[i].clone()).collect();
        let u: Vec<CVec> = indices.iter().map(|&i| spectrum.left[i].clone()).collect();
        let omega_ref = match omega_ref {
            Some(w) => w,
            None => {
                let proj: Vec<f64> = u.iter().map(|ui| hdot(ui, &sys.f_a).norm()).collect();
                let best = (0..lambda.len()).max_by(|&a, &b| proj[a].total_cmp(&proj[b])).unwrap();
                lambda[best].im
            }
        };
        let resonances = detect_inner_resonances(&lambda, settings.max_order, settings.inner_tol)?;
        let (r, r_d) = detect_external_resonance(&lambda, omega_ref, settings.outer_tol, settings.denominator_cap)?;
        Ok(Self { indices, lambda, v, u, resonances, r, r_d, omega_ref, spectrum: spectrum.eigenvalues.clone(), settings })
    }

    pub fn m(&self) -> usize {
        self.lambda.len()
    }

    pub fn r_f64(&self) -> Vec<f64> {
        self.r.iter().map(|x| *x.numer() as f64 / *x.denom() as f64).collect()
    }

    /// Eigenvalue, right and left vector of reduced coordinate `s` in `0..2m`
    /// (conjugates for `s >= m`).
    pub fn mode(&self, s: usize) -> (Complex64, CVec, CVec) {
        let m = self.m();
        if s < m {
            (self.lambda[s], self.v[s].clone(), self.u[s].clone())
        } else {
            let i = s - m;
            (self.lambda[i].conj(), self.v[i].map(|z| z.conj()), self.u[i].map(|z| z.conj()))
        }
    }

    pub fn r_d_f64(&self) -> f64 {
        *self.r_d.numer() as f64 / *self.r_d.denom() as f64
    }
}

/// Real eigenvalues of a real matrix sorted by real part (descending).
pub fn real_matrix_eigenvalues(j: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(j.clone(), 1e-14, 200 * j.nrows().max(10))
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let mut ev: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(ev)
}

pub fn complex_vec_is_real(v: &DVector<Complex64>, tol: f64) -> bool {
    v.iter().all(|z| z.im.abs() <= tol)
}
