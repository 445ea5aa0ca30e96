//! Sparse multivariate polynomials with real coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::jets::Jet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: Vec<Monomial>,
}

impl Poly {
    pub fn new(nvars: usize, terms: Vec<Monomial>) -> Result<Poly> {
        for t in &terms {
            if t.powers.len() != nvars {
                return invalid(format!("monomial has {} exponents, expected {nvars}", t.powers.len()));
            }
            if !t.coeff.is_finite() {
                return invalid("non-finite polynomial coefficient");
            }
        }
        let mut p = Poly { nvars, terms };
        p.combine();
        Ok(p)
    }

    /// Shorthand for tests and the model library: `(coeff, powers)` pairs.
    pub fn from_pairs(nvars: usize, pairs: &[(f64, &[u32])]) -> Result<Poly> {
        let terms = pairs.iter().map(|(c, p)| Monomial { coeff: *c, powers: p.to_vec() }).collect();
        Poly::new(nvars, terms)
    }

    pub fn constant(nvars: usize, c: f64) -> Poly {
        Poly { nvars, terms: vec![Monomial { coeff: c, powers: vec![0; nvars] }] }
    }

    fn combine(&mut self) {
        self.terms.sort_by(|a, b| a.powers.cmp(&b.powers));
        let mut out: Vec<Monomial> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match out.last_mut() {
                Some(last) if last.powers == t.powers => last.coeff += t.coeff,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coeff != 0.0);
        self.terms = out;
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.powers.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.powers.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product::<f64>())
            .sum()
    }

    /// Evaluates the polynomial on jets (one per variable, all the same shape).
    pub fn eval_jet(&self, x: &[Jet]) -> Jet {
        assert_eq!(x.len(), self.nvars, "one jet per polynomial variable");
        let mut acc = x[0].scale(0.0);
        if self.terms.is_empty() {
            return acc;
        }
        let maxp: Vec<u32> =
            (0..self.nvars).map(|v| self.terms.iter().map(|t| t.powers[v]).max().unwrap_or(0)).collect();
        let one = acc.add_scalar(1.0);
        let pows: Vec<Vec<Jet>> = (0..self.nvars)
            .map(|v| {
                let mut ps = vec![one.clone()];
                for k in 1..=maxp[v] as usize {
                    ps.push(&ps[k - 1] * &x[v]);
                }
                ps
            })
            .collect();
        for t in &self.terms {
            let mut m: Option<Jet> = None;
            for (v, &p) in t.powers.iter().enumerate() {
                if p == 0 {
                    continue;
                }
                let f = &pows[v][p as usize];
                m = Some(match m {
                    None => f.clone(),
                    Some(prev) => &prev * f,
                });
            }
            match m {
                None => acc = acc.add_scalar(t.coeff),
                Some(m) => acc += &m.scale(t.coeff),
            }
        }
        acc
    }

    pub fn derivative(&self, var: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.powers[var] > 0)
            .map(|t| {
                let mut powers = t.powers.clone();
                powers[var] -= 1;
                Monomial { coeff: t.coeff * t.powers[var] as f64, powers }
            })
            .collect();
        let mut p = Poly { nvars: self.nvars, terms };
        p.combine();
        p
    }

    pub fn scale(&self, c: f64) -> Poly {
        let terms = self.terms.iter().map(|t| Monomial { coeff: t.coeff * c, powers: t.powers.clone() }).collect();
        let mut p = Poly { nvars: self.nvars, terms };
        p.combine();
        p
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut p = Poly { nvars: self.nvars, terms: [self.terms.clone(), other.terms.clone()].concat() };
        p.combine();
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_derivative() {
        // 1 + x² + 2 t x y   in (x, y, t)
        let p = Poly::from_pairs(3, &[(1.0, &[0, 0, 0]), (1.0, &[2, 0, 0]), (2.0, &[1, 1, 1])]).unwrap();
        assert_eq!(p.eval(&[1.0, 2.0, 3.0]), 1.0 + 1.0 + 12.0);
        let px = p.derivative(0);
        assert_eq!(px.eval(&[1.0, 2.0, 3.0]), 2.0 + 12.0);
        let jets = Jet::variables(&[1.0, 2.0, 3.0], 3).unwrap();
        let j = p.eval_jet(&jets);
        assert!((j.value() - 14.0).abs() < 1e-14);
        assert!((j.partial(&[1, 1, 1]).unwrap() - 2.0).abs() < 1e-14);
        assert!((j.partial(&[2, 0, 0]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn like_terms_merge() {
        let p = Poly::from_pairs(1, &[(1.0, &[2]), (-1.0, &[2]), (3.0, &[0])]).unwrap();
        assert_eq!(p.terms().len(), 1);
        assert_eq!(p.degree(), 0);
        assert!(Poly::from_pairs(2, &[(1.0, &[1])]).is_err());
    }
}
