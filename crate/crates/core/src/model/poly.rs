use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One monomial `coeff * prod(z[idx]^pow)` contributing to output `output`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coeff: f64,
    pub output: usize,
    pub factors: Vec<(usize, u32)>,
}

impl PolyTerm {
    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|f| f.1).sum()
    }
}

/// Sparse polynomial map R^n -> R^m.
///
/// Factor lists are kept sorted by state index with merged powers, and terms
/// sharing an output and factor multiset are summed on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRepr", into = "PolyRepr")]
pub struct PolynomialForce {
    input_dim: usize,
    output_dim: usize,
    terms: Vec<PolyTerm>,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    input_dim: usize,
    output_dim: usize,
    terms: Vec<PolyTerm>,
}

impl TryFrom<PolyRepr> for PolynomialForce {
    type Error = Error;
    fn try_from(r: PolyRepr) -> Result<Self> {
        PolynomialForce::new(r.input_dim, r.output_dim, r.terms)
    }
}

impl From<PolynomialForce> for PolyRepr {
    fn from(p: PolynomialForce) -> Self {
        PolyRepr { input_dim: p.input_dim, output_dim: p.output_dim, terms: p.terms }
    }
}

fn normalize_factors(factors: &[(usize, u32)]) -> Vec<(usize, u32)> {
    let mut acc: BTreeMap<usize, u32> = BTreeMap::new();
    for &(i, p) in factors {
        if p > 0 {
            *acc.entry(i).or_insert(0) += p;
        }
    }
    acc.into_iter().collect()
}

impl PolynomialForce {
    pub fn new(input_dim: usize, output_dim: usize, terms: Vec<PolyTerm>) -> Result<Self> {
        let mut merged: BTreeMap<(usize, Vec<(usize, u32)>), f64> = BTreeMap::new();
        for t in terms {
            if !t.coeff.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite coefficient {}", t.coeff)));
            }
            if t.output >= output_dim {
                return Err(Error::Dimension(format!(
                    "term output {} >= output dimension {output_dim}",
                    t.output
                )));
            }
            if let Some(&(i, _)) = t.factors.iter().find(|f| f.0 >= input_dim) {
                return Err(Error::Dimension(format!(
                    "state index {i} >= state dimension {input_dim}"
                )));
            }
            *merged.entry((t.output, normalize_factors(&t.factors))).or_insert(0.0) += t.coeff;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|((output, factors), coeff)| PolyTerm { coeff, output, factors })
            .collect();
        Ok(Self { input_dim, output_dim, terms })
    }

    pub fn zero(input_dim: usize, output_dim: usize) -> Self {
        Self { input_dim, output_dim, terms: Vec::new() }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn terms(&self) -> &[PolyTerm] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest total degree over all terms, 0 for the empty force.
    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(PolyTerm::degree).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> u32 {
        self.terms.iter().map(PolyTerm::degree).min().unwrap_or(0)
    }

    /// Re-index inputs and outputs, e.g. to embed a force on (x, xdot) into a
    /// larger state with a sign flip.
    pub fn remap(
        &self,
        input_dim: usize,
        output_dim: usize,
        in_map: impl Fn(usize) -> usize,
        out_map: impl Fn(usize) -> usize,
        scale: f64,
    ) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|t| PolyTerm {
                coeff: scale * t.coeff,
                output: out_map(t.output),
                factors: t.factors.iter().map(|&(i, p)| (in_map(i), p)).collect(),
            })
            .collect();
        Self::new(input_dim, output_dim, terms)
    }

    pub fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        assert_eq!(z.len(), self.input_dim, "state dimension");
        let mut out = DVector::zeros(self.output_dim);
        for t in &self.terms {
            let mut v = t.coeff;
            for &(i, p) in &t.factors {
                v *= z[i].powi(p as i32);
            }
            out[t.output] += v;
        }
        out
    }

    pub fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(z.len(), self.input_dim, "state dimension");
        let mut jac = DMatrix::zeros(self.output_dim, self.input_dim);
        for t in &self.terms {
            for (k, &(ik, pk)) in t.factors.iter().enumerate() {
                let mut v = t.coeff * pk as f64 * z[ik].powi(pk as i32 - 1);
                for (l, &(il, pl)) in t.factors.iter().enumerate() {
                    if l != k {
                        v *= z[il].powi(pl as i32);
                    }
                }
                jac[(t.output, ik)] += v;
            }
        }
        jac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(coeff: f64, output: usize, factors: &[(usize, u32)]) -> PolyTerm {
        PolyTerm { coeff, output, factors: factors.to_vec() }
    }

    #[test]
    fn empty_force_is_zero() {
        let f = PolynomialForce::zero(3, 3);
        assert_eq!(f.eval(&DVector::from_vec(vec![1.0, 2.0, 3.0])).norm(), 0.0);
        assert_eq!(f.max_degree(), 0);
    }

    #[test]
    fn square_term_value() {
        let f = PolynomialForce::new(2, 2, vec![term(2.0, 1, &[(0, 2)])]).unwrap();
        let y = f.eval(&DVector::from_vec(vec![3.0, -7.0]));
        assert_eq!(y[1], 18.0);
        assert_eq!(y[0], 0.0);
    }

    #[test]
    fn duplicates_merge() {
        let f = PolynomialForce::new(
            2,
            1,
            vec![term(1.0, 0, &[(0, 1), (1, 1)]), term(2.0, 0, &[(1, 1), (0, 1)]), term(1.0, 0, &[(0, 1), (0, 1)])],
        )
        .unwrap();
        assert_eq!(f.terms().len(), 2);
        assert!(f.terms().iter().any(|t| t.coeff == 3.0 && t.factors == vec![(0, 1), (1, 1)]));
        assert!(f.terms().iter().any(|t| t.factors == vec![(0, 2)]));
    }

    #[test]
    fn cancelling_terms_vanish() {
        let f = PolynomialForce::new(1, 1, vec![term(1.0, 0, &[(0, 3)]), term(-1.0, 0, &[(0, 3)])]).unwrap();
        assert!(f.is_empty());
    }

    #[test]
    fn bad_indices_rejected() {
        assert!(PolynomialForce::new(2, 2, vec![term(1.0, 0, &[(2, 2)])]).is_err());
        assert!(PolynomialForce::new(2, 2, vec![term(1.0, 2, &[(0, 2)])]).is_err());
    }

    #[test]
    fn json_roundtrip_validates() {
        let f = PolynomialForce::new(2, 2, vec![term(0.5, 0, &[(0, 1), (1, 2)])]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        let g: PolynomialForce = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        let bad = r#"{"input_dim":1,"output_dim":1,"terms":[{"coeff":1.0,"output":0,"factors":[[4,2]]}]}"#;
        assert!(serde_json::from_str::<PolynomialForce>(bad).is_err());
    }
}
