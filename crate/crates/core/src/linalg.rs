//! Small dense complex linear-algebra helpers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex_mat(a: &DMatrix<f64>) -> CMat {
    a.map(|x| c(x, 0.0))
}

pub fn to_complex_vec(a: &DVector<f64>) -> CVec {
    a.map(|x| c(x, 0.0))
}

/// `u^H v`.
pub fn hdot(u: &CVec, v: &CVec) -> Complex64 {
    u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn solve(a: CMat, b: &CVec, what: &str) -> Result<CVec> {
    let lu = a.lu();
    lu.solve(b).filter(|x| x.iter().all(|v| v.is_finite())).ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn solve_real(a: DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let lu = a.lu();
    lu.solve(b).filter(|x| x.iter().all(|v| v.is_finite())).ok_or_else(|| Error::Singular(what.to_string()))
}

/// Solve `[[A, C], [R^H, 0]] (x; s) = (b; d)` where `C` has columns `cols`
/// and `R` has columns `rows`.
pub fn bordered_solve(a: &CMat, cols: &[CVec], rows: &[CVec], b: &CVec, d: &[Complex64], what: &str) -> Result<(CVec, Vec<Complex64>)> {
    let n = a.nrows();
    let k = cols.len();
    debug_assert_eq!(rows.len(), k);
    debug_assert_eq!(d.len(), k);
    let mut big = CMat::zeros(n + k, n + k);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    for j in 0..k {
        big.view_mut((0, n + j), (n, 1)).copy_from(&cols[j]);
        for i in 0..n {
            big[(n + j, i)] = rows[j][i].conj();
        }
    }
    let mut rhs = CVec::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(b);
    for j in 0..k {
        rhs[n + j] = d[j];
    }
    let sol = solve(big, &rhs, what)?;
    Ok((sol.rows(0, n).into_owned(), (0..k).map(|j| sol[n + j]).collect()))
}

/// Reciprocal condition estimate from LU pivots (cheap, order-of-magnitude).
pub fn pivot_ratio(a: &CMat) -> f64 {
    let lu = a.clone().lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..u.nrows().min(u.ncols()) {
        let p = u[(i, i)].norm();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if hi == 0.0 { 0.0 } else { lo / hi }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bordered_system_recovers_solution() {
        let a = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 1.0)]);
        let e0 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let b = CVec::from_vec(vec![c(2.0, 0.0), c(1.0, 1.0)]);
        let (x, s) = bordered_solve(&a, &[e0.clone()], &[e0], &b, &[c(0.0, 0.0)], "t").unwrap();
        assert!((x[0]).norm() < 1e-14);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((s[0] - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn singular_reported() {
        let a = CMat::zeros(2, 2);
        assert!(solve(a, &CVec::zeros(2), "zero").is_err());
    }
}
