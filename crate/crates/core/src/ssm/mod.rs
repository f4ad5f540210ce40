//! Autonomous SSM expansion and the leading-order non-autonomous part.

mod nonauto;

pub use nonauto::{leading_nonautonomous, linear_response, NonAutonomousPart};

use std::collections::{BTreeMap, HashMap};

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{bordered_solve, c, hdot, solve, to_complex_mat, CVec};
use crate::model::{FirstOrderSystem, PolynomialForce};
use crate::multiindex::{series_mul, series_powers, MonomialTable, Series};
use crate::spectral::{detect_inner_resonances, MasterSubspace, Rational, ResonanceSettings, ResonantTerm};

/// Parameterization and eigenvector conventions, recorded with every model.
pub const CONVENTIONS: &str = "p = (q, conj q); displacement part of each master right vector is \
mass-normalized with its largest entry real positive; left vectors satisfy u^H B v = 1; \
normal-form style: W_k has no component along resonant master directions";

/// Coefficient of `q^l conj(q)^j` in the reduced dynamics of one master mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTerm {
    pub l: Vec<u32>,
    pub j: Vec<u32>,
    pub coeff: Complex64,
}

#[derive(Clone, Debug)]
pub struct ReducedModel {
    pub master: MasterSubspace,
    pub order: u32,
    pub table: MonomialTable,
    /// SSM coefficients aligned with `table`.
    pub w: Vec<CVec>,
    /// Nonlinear reduced-dynamics coefficients per monomial: `(coordinate s in 0..2m, R_{k,s})`.
    pub r_terms: Vec<Vec<(usize, Complex64)>>,
    /// `gamma[i]`: resonant terms of master mode `i`.
    pub gamma: Vec<Vec<GammaTerm>>,
    /// Near-resonances rejected because `<r, l - j> != r_i`; solved as non-resonant.
    pub dropped: Vec<(usize, ResonantTerm)>,
    /// Modal forcing `f_i`.
    pub f_mod: Vec<Complex64>,
    pub nonauto: BTreeMap<u64, NonAutonomousPart>,
    pub n_dof: Option<usize>,
}

fn is_canonical(k: &[u32], m: usize) -> bool {
    k[..m] >= k[m..]
}

fn swapped(k: &[u32], m: usize) -> Vec<u32> {
    k[m..].iter().chain(k[..m].iter()).copied().collect()
}

fn swap_mode(s: usize, m: usize) -> usize {
    if s < m { s + m } else { s - m }
}

/// `[F(W(p))]_k` for all `|k| <= max_deg`.
pub(crate) fn compose_force(t: &MonomialTable, f: &PolynomialForce, w: &[CVec], max_deg: u32) -> Vec<CVec> {
    let mut out = vec![CVec::zeros(f.output_dim()); t.len()];
    if f.is_empty() || max_deg < 2 {
        return out;
    }
    let mut maxpow: BTreeMap<usize, u32> = BTreeMap::new();
    for term in f.terms() {
        for &(v, p) in &term.factors {
            let e = maxpow.entry(v).or_insert(0);
            *e = (*e).max(p);
        }
    }
    let powers: HashMap<usize, Vec<Series>> = maxpow
        .iter()
        .map(|(&v, &p)| {
            let s: Series = (0..t.len())
                .map(|i| if t.degree(i) < max_deg { w[i][v] } else { c(0.0, 0.0) })
                .collect();
            (v, series_powers(t, &s, p, max_deg))
        })
        .collect();
    for term in f.terms() {
        let (v0, p0) = term.factors[0];
        let mut prod = powers[&v0][p0 as usize - 1].clone();
        for &(v, p) in &term.factors[1..] {
            prod = series_mul(t, &prod, &powers[&v][p as usize - 1], max_deg);
        }
        for (i, val) in prod.iter().enumerate() {
            if *val != c(0.0, 0.0) {
                out[i][term.output] += val * term.coeff;
            }
        }
    }
    out
}

/// Eigen solve, master selection and autonomous expansion in one call.
/// `modes` are pair indices (0 = slowest pair).
pub fn reduce(
    sys: &FirstOrderSystem,
    modes: &[usize],
    order: u32,
    settings: ResonanceSettings,
    omega_ref: Option<f64>,
) -> Result<ReducedModel> {
    let top = modes.iter().max().ok_or_else(|| Error::InvalidInput("no master modes selected".into()))?;
    let k = (2 * (top + 1)).min(sys.dim());
    let sp = crate::spectral::eig_pair(sys, k)?;
    let master = MasterSubspace::new(sys, &sp, modes, settings, omega_ref)?;
    expand_autonomous(sys, &master, order)
}

/// Solve the invariance equation order by order up to `order`.
pub fn expand_autonomous(sys: &FirstOrderSystem, master: &MasterSubspace, order: u32) -> Result<ReducedModel> {
    if order < 2 {
        return Err(Error::InvalidInput(format!("expansion order must be >= 2, got {order}")));
    }
    let m = master.m();
    let nv = 2 * m;
    let n = sys.dim();
    let t = MonomialTable::new(nv, order);
    let modes: Vec<(Complex64, CVec, CVec)> = (0..nv).map(|s| master.mode(s)).collect();

    let inner = detect_inner_resonances(&master.lambda, order, master.settings.inner_tol)?;
    let mut dropped = Vec::new();
    let mut res_of: Vec<Vec<usize>> = vec![Vec::new(); t.len()];
    for (i, terms) in inner.into_iter().enumerate() {
        for term in terms {
            let lhs = term
                .l
                .iter()
                .zip(&term.j)
                .zip(&master.r)
                .fold(Rational::from(0), |acc, ((&l, &j), r)| acc + *r * (l as i64 - j as i64));
            if lhs != master.r[i] {
                dropped.push((i, term));
                continue;
            }
            let k: Vec<u32> = term.l.iter().chain(term.j.iter()).copied().collect();
            let idx = t.find(&k).expect("resonant monomial within order");
            res_of[idx].push(i);
            res_of[t.find(&swapped(&k, m)).unwrap()].push(i + m);
        }
    }

    let a = to_complex_mat(&sys.a);
    let b = to_complex_mat(&sys.b);
    let bh = b.adjoint();
    let mut w = vec![CVec::zeros(n); t.len()];
    for (s, mode) in modes.iter().enumerate() {
        w[t.unit(s)] = mode.1.clone();
    }
    let mut r_terms: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); t.len()];
    let mut nz_r: Vec<(usize, usize, Complex64)> = Vec::new();

    for d in 2..=order {
        let fw = compose_force(&t, &sys.f_nl, &w, d);
        let canon: Vec<usize> = t.degree_range(d).filter(|&i| is_canonical(t.exps(i), m)).collect();
        let solved: Vec<Result<(usize, CVec, Vec<(usize, Complex64)>)>> = canon
            .par_iter()
            .map(|&i| {
                let k = t.exps(i);
                let kl: Complex64 = k.iter().zip(&modes).map(|(&e, md)| md.0 * e as f64).sum();
                let mut mixed = CVec::zeros(n);
                for &(i2, s, coeff) in &nz_r {
                    let k2 = t.exps(i2);
                    let k1: Option<Vec<u32>> = (0..nv)
                        .map(|v| {
                            let e = k[v] as i64 - k2[v] as i64 + (v == s) as i64;
                            (e >= 0).then_some(e as u32)
                        })
                        .collect();
                    if let Some(k1) = k1 {
                        if k1[s] > 0 {
                            let i1 = t.find(&k1).expect("lower-degree monomial");
                            mixed += &w[i1] * (coeff * k1[s] as f64);
                        }
                    }
                }
                let rhs = &fw[i] - &b * mixed;
                let op = &b * kl - &a;
                let res = &res_of[i];
                if res.is_empty() {
                    for lam in &master.spectrum {
                        if (kl - lam).norm() <= 1e-10 * lam.norm().max(1.0) {
                            return Err(Error::Resonance(format!(
                                "monomial {k:?} is resonant with eigenvalue {lam} but not in the resonance set; \
                                 increase the inner resonance tolerance"
                            )));
                        }
                    }
                    let x = solve(op, &rhs, "cohomological equation")?;
                    Ok((i, x, Vec::new()))
                } else {
                    let cols: Vec<CVec> = res.iter().map(|&s| &b * &modes[s].1).collect();
                    let rows: Vec<CVec> = res.iter().map(|&s| &bh * &modes[s].2).collect();
                    let zeros = vec![c(0.0, 0.0); res.len()];
                    let (x, sv) = bordered_solve(&op, &cols, &rows, &rhs, &zeros, "bordered cohomological equation")?;
                    Ok((i, x, res.iter().copied().zip(sv).collect()))
                }
            })
            .collect();
        for item in solved {
            let (i, x, rs) = item?;
            let k = t.exps(i).to_vec();
            let is = t.find(&swapped(&k, m)).unwrap();
            if is != i {
                w[is] = x.map(|z| z.conj());
                r_terms[is] = rs.iter().map(|&(s, v)| (swap_mode(s, m), v.conj())).collect();
                nz_r.extend(r_terms[is].iter().map(|&(s, v)| (is, s, v)));
            }
            w[i] = x;
            nz_r.extend(rs.iter().map(|&(s, v)| (i, s, v)));
            r_terms[i] = rs;
        }
    }

    let mut gamma = vec![Vec::new(); m];
    for (i, rs) in r_terms.iter().enumerate() {
        for &(s, v) in rs {
            if s < m {
                let k = t.exps(i);
                gamma[s].push(GammaTerm { l: k[..m].to_vec(), j: k[m..].to_vec(), coeff: v });
            }
        }
    }
    let f_mod = (0..m)
        .map(|i| if master.r[i] == Rational::from(1) { hdot(&master.u[i], &sys.f_a) } else { c(0.0, 0.0) })
        .collect();
    Ok(ReducedModel {
        master: master.clone(),
        order,
        table: t,
        w,
        r_terms,
        gamma,
        dropped,
        f_mod,
        nonauto: BTreeMap::new(),
        n_dof: sys.n_dof(),
    })
}

/// Max relative per-monomial residual of `B DW R = A W + F(W)` truncated at the expansion order.
pub fn invariance_residual(sys: &FirstOrderSystem, rm: &ReducedModel) -> f64 {
    let t = &rm.table;
    let nv = t.nvars();
    let n = sys.dim();
    let a = to_complex_mat(&sys.a);
    let b = to_complex_mat(&sys.b);
    let lam: Vec<Complex64> = (0..nv).map(|s| rm.master.mode(s).0).collect();
    let mut dwr = vec![CVec::zeros(n); t.len()];
    let nz: Vec<(usize, usize, Complex64)> =
        rm.r_terms.iter().enumerate().flat_map(|(i, rs)| rs.iter().map(move |&(s, v)| (i, s, v))).collect();
    for i1 in 0..t.len() {
        let k1 = t.exps(i1);
        for s in 0..nv {
            if k1[s] == 0 {
                continue;
            }
            dwr[i1] += &rm.w[i1] * (lam[s] * k1[s] as f64);
            for &(i2, s2, v) in &nz {
                if s2 != s {
                    continue;
                }
                let mut k: Vec<u32> = k1.to_vec();
                k[s] -= 1;
                for (kv, e) in k.iter_mut().zip(t.exps(i2)) {
                    *kv += e;
                }
                if let Some(idx) = t.find(&k) {
                    dwr[idx] += &rm.w[i1] * (v * k1[s] as f64);
                }
            }
        }
    }
    let fw = compose_force(t, &sys.f_nl, &rm.w, rm.order);
    let (na, nb) = (a.norm(), b.norm());
    let mut worst: f64 = 0.0;
    for i in 0..t.len() {
        let lhs = &b * &dwr[i];
        let aw = &a * &rm.w[i];
        let res = (&lhs - &aw - &fw[i]).norm();
        let scale = (nb * dwr[i].norm()).max(na * rm.w[i].norm()).max(fw[i].norm());
        if scale > 1e-300 {
            worst = worst.max(res / scale);
        }
    }
    worst
}

impl ReducedModel {
    pub fn m(&self) -> usize {
        self.master.m()
    }

    /// `W(p)` at complex reduced coordinates `p` (length 2m).
    pub fn eval_w(&self, p: &[Complex64]) -> CVec {
        let vals = self.table.eval_all(p);
        let mut z = CVec::zeros(self.w[0].len());
        for (wk, v) in self.w.iter().zip(vals) {
            z += wk * v;
        }
        z
    }

    /// Real part of selected rows of `W(p)`.
    pub fn eval_w_rows(&self, p: &[Complex64], rows: &[usize]) -> DVector<f64> {
        let vals = self.table.eval_all(p);
        DVector::from_iterator(
            rows.len(),
            rows.iter().map(|&r| self.w.iter().zip(&vals).map(|(wk, v)| (wk[r] * v).re).sum::<f64>()),
        )
    }

    /// `p = (q, conj q)` from `q_i = x_i + i y_i`.
    pub fn p_from_cartesian(xy: &[f64]) -> Vec<Complex64> {
        let m = xy.len() / 2;
        let q: Vec<Complex64> = (0..m).map(|i| c(xy[2 * i], xy[2 * i + 1])).collect();
        q.iter().copied().chain(q.iter().map(|z| z.conj())).collect()
    }

    pub fn nonauto_at(&self, omega: f64) -> Option<&NonAutonomousPart> {
        self.nonauto.get(&omega.to_bits())
    }

    /// Solve and cache `x0` for each frequency (in parallel).
    pub fn solve_nonauto(&mut self, sys: &FirstOrderSystem, omegas: &[f64]) -> Result<()> {
        let missing: Vec<f64> = omegas.iter().copied().filter(|w| self.nonauto_at(*w).is_none()).collect();
        let parts: Vec<Result<NonAutonomousPart>> =
            missing.par_iter().map(|&w| leading_nonautonomous(sys, self, w)).collect();
        for p in parts {
            let p = p?;
            self.nonauto.insert(p.omega.to_bits(), p);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ReducedModelDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ReducedModelDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ReducedModelDoc {
    version: u32,
    conventions: String,
    master: MasterSubspace,
    order: u32,
    w: Vec<(Vec<u32>, CVec)>,
    r: Vec<(Vec<u32>, usize, Complex64)>,
    gamma: Vec<Vec<GammaTerm>>,
    dropped: Vec<(usize, ResonantTerm)>,
    f_mod: Vec<Complex64>,
    nonauto: Vec<NonAutonomousPart>,
    n_dof: Option<usize>,
}

impl From<&ReducedModel> for ReducedModelDoc {
    fn from(rm: &ReducedModel) -> Self {
        let t = &rm.table;
        Self {
            version: MODEL_SCHEMA_VERSION,
            conventions: CONVENTIONS.into(),
            master: rm.master.clone(),
            order: rm.order,
            w: (0..t.len()).map(|i| (t.exps(i).to_vec(), rm.w[i].clone())).collect(),
            r: rm
                .r_terms
                .iter()
                .enumerate()
                .flat_map(|(i, rs)| rs.iter().map(move |&(s, v)| (t.exps(i).to_vec(), s, v)))
                .collect(),
            gamma: rm.gamma.clone(),
            dropped: rm.dropped.clone(),
            f_mod: rm.f_mod.clone(),
            nonauto: rm.nonauto.values().cloned().collect(),
            n_dof: rm.n_dof,
        }
    }
}

impl TryFrom<ReducedModelDoc> for ReducedModel {
    type Error = Error;
    fn try_from(doc: ReducedModelDoc) -> Result<Self> {
        if doc.version != MODEL_SCHEMA_VERSION {
            return Err(Error::Config(format!("reduced model version {} unsupported", doc.version)));
        }
        let m = doc.master.m();
        let t = MonomialTable::new(2 * m, doc.order);
        let n = doc.w.first().map(|x| x.1.len()).unwrap_or(0);
        let mut w = vec![CVec::zeros(n); t.len()];
        for (k, v) in doc.w {
            let i = t.find(&k).ok_or_else(|| Error::Config(format!("monomial {k:?} outside table")))?;
            w[i] = v;
        }
        let mut r_terms = vec![Vec::new(); t.len()];
        for (k, s, v) in doc.r {
            let i = t.find(&k).ok_or_else(|| Error::Config(format!("monomial {k:?} outside table")))?;
            r_terms[i].push((s, v));
        }
        Ok(Self {
            master: doc.master,
            order: doc.order,
            table: t,
            w,
            r_terms,
            gamma: doc.gamma,
            dropped: doc.dropped,
            f_mod: doc.f_mod,
            nonauto: doc.nonauto.into_iter().map(|p| (p.omega.to_bits(), p)).collect(),
            n_dof: doc.n_dof,
        })
    }
}

#[cfg(test)]
mod tests;
