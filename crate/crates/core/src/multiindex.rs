//! Monomial tables and truncated power series in the reduced coordinates.

use std::collections::HashMap;

use num_complex::Complex64;

/// All exponent vectors `k` in `nvars` variables with `1 <= |k| <= order`,
/// grouped by total degree.
#[derive(Clone, Debug)]
pub struct MonomialTable {
    nvars: usize,
    order: u32,
    exps: Vec<Vec<u32>>,
    degree_start: Vec<usize>,
    index: HashMap<u64, usize>,
}

const BITS: u32 = 8;

fn pack(k: &[u32]) -> u64 {
    k.iter().enumerate().fold(0u64, |acc, (i, &e)| acc + ((e as u64) << (BITS * i as u32)))
}

impl MonomialTable {
    pub fn new(nvars: usize, order: u32) -> Self {
        assert!(nvars >= 1 && nvars * BITS as usize <= 64, "unsupported variable count {nvars}");
        assert!(order < 1 << BITS, "order too large");
        let mut exps = Vec::new();
        let mut degree_start = vec![0, 0];
        for d in 1..=order {
            let mut level = Vec::new();
            fill_degree(nvars, d, &mut vec![0; nvars], 0, &mut level);
            // Reverse lexicographic puts q-heavy monomials first.
            level.sort_by(|a, b| b.cmp(a));
            exps.extend(level);
            degree_start.push(exps.len());
        }
        let index = exps.iter().enumerate().map(|(i, k)| (pack(k), i)).collect();
        Self { nvars, order, exps, degree_start, index }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exps(&self, i: usize) -> &[u32] {
        &self.exps[i]
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.exps[i].iter().sum()
    }

    /// Index range of monomials with total degree `d` (`1 <= d <= order`).
    pub fn degree_range(&self, d: u32) -> std::ops::Range<usize> {
        let d = d as usize;
        if d == 0 || d + 1 >= self.degree_start.len() {
            return 0..0;
        }
        self.degree_start[d]..self.degree_start[d + 1]
    }

    /// Index range of all monomials with degree `<= d`.
    pub fn up_to(&self, d: u32) -> std::ops::Range<usize> {
        0..self.degree_start[(d as usize).min(self.order as usize) + 1]
    }

    pub fn find(&self, k: &[u32]) -> Option<usize> {
        if k.iter().sum::<u32>() > self.order || k.iter().any(|&e| e >= 1 << BITS) {
            return None;
        }
        self.index.get(&pack(k)).copied()
    }

    /// Index of `exps(a) + exps(b)` if within the table.
    pub fn add(&self, a: usize, b: usize) -> Option<usize> {
        if self.degree(a) + self.degree(b) > self.order {
            return None;
        }
        self.index.get(&(pack(&self.exps[a]) + pack(&self.exps[b]))).copied()
    }

    pub fn unit(&self, var: usize) -> usize {
        let mut k = vec![0; self.nvars];
        k[var] = 1;
        self.find(&k).expect("unit monomial")
    }

    /// Evaluate all monomials at `p`.
    pub fn eval_all(&self, p: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for (i, k) in self.exps.iter().enumerate() {
            let deg: u32 = k.iter().sum();
            if deg == 1 {
                let v = k.iter().position(|&e| e == 1).unwrap();
                out[i] = p[v];
            } else {
                // Multiply a lower-degree monomial by one variable.
                let v = k.iter().position(|&e| e > 0).unwrap();
                let mut lower = k.clone();
                lower[v] -= 1;
                out[i] = out[self.find(&lower).unwrap()] * p[v];
            }
        }
        out
    }
}

fn fill_degree(nvars: usize, left: u32, cur: &mut Vec<u32>, pos: usize, out: &mut Vec<Vec<u32>>) {
    if pos == nvars - 1 {
        cur[pos] = left;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for v in (0..=left).rev() {
        cur[pos] = v;
        fill_degree(nvars, left - v, cur, pos + 1, out);
    }
    cur[pos] = 0;
}

/// Scalar truncated series `sum_k c_k p^k` without constant term, stored
/// densely over a [`MonomialTable`].
pub type Series = Vec<Complex64>;

/// Product truncated at degree `max_deg`.
pub fn series_mul(t: &MonomialTable, a: &Series, b: &Series, max_deg: u32) -> Series {
    let mut out = vec![Complex64::new(0.0, 0.0); t.len()];
    let nz_b: Vec<usize> = (0..t.len()).filter(|&j| b[j] != Complex64::new(0.0, 0.0)).collect();
    for i in t.up_to(max_deg.saturating_sub(1)) {
        if a[i] == Complex64::new(0.0, 0.0) {
            continue;
        }
        let di = t.degree(i);
        for &j in &nz_b {
            if di + t.degree(j) > max_deg {
                continue;
            }
            if let Some(k) = t.add(i, j) {
                out[k] += a[i] * b[j];
            }
        }
    }
    out
}

/// Integer powers `s^1 .. s^max_pow` truncated at `max_deg`.
pub fn series_powers(t: &MonomialTable, s: &Series, max_pow: u32, max_deg: u32) -> Vec<Series> {
    let mut out = vec![s.clone()];
    for _ in 1..max_pow {
        let next = series_mul(t, out.last().unwrap(), s, max_deg);
        out.push(next);
    }
    out
}
