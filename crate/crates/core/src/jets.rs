//! Truncated multivariate Taylor polynomials ("jets").
//!
//! Coefficients are stored densely in graded-lexicographic order. Products are
//! driven by a precomputed table of index triples shared by every jet with the
//! same `(nvars, order)`.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 6;

struct Layout {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    degree: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    // products[i] lists (j, k) such that exps[i] + exps[j] = exps[k]
    products: Vec<Vec<(u32, u32)>>,
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        let mut exps = Vec::new();
        let mut cur = vec![0u8; nvars];
        for d in 0..=order {
            push_compositions(d, 0, &mut cur, &mut exps);
        }
        let degree: Vec<usize> = exps.iter().map(|e| e.iter().map(|&x| x as usize).sum()).collect();
        let index: HashMap<Vec<u8>, usize> = exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let mut products = vec![Vec::new(); exps.len()];
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                let sum: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                products[i].push((j as u32, index[&sum] as u32));
            }
        }
        Layout { nvars, order, exps, degree, index, products }
    }

    fn get(nvars: usize, order: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard.entry((nvars, order)).or_insert_with(|| Arc::new(Layout::build(nvars, order))).clone()
    }
}

// Compositions of `d` into the remaining slots, first variable's exponent descending.
fn push_compositions(d: usize, slot: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    let n = cur.len();
    if slot + 1 == n {
        cur[slot] = d as u8;
        out.push(cur.clone());
        return;
    }
    for e in (0..=d).rev() {
        cur[slot] = e as u8;
        push_compositions(d - e, slot + 1, cur, out);
    }
    cur[slot] = 0;
}

/// Number of monomials of total degree at most `order` in `nvars` variables.
pub fn jet_len(nvars: usize, order: usize) -> usize {
    let mut c = 1usize;
    for k in 1..=order {
        c = c * (nvars + k) / k;
    }
    c
}

#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (e, c) in self.layout.exps.iter().zip(&self.coeffs) {
            if *c != 0.0 {
                m.entry(e, c);
            }
        }
        m.finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.nvars() == other.nvars() && self.order() == other.order() && self.coeffs == other.coeffs
    }
}

impl Jet {
    fn check_shape(nvars: usize, order: usize) -> Result<()> {
        if nvars == 0 {
            return Err(Error::Invalid("a jet needs at least one variable".into()));
        }
        if order > MAX_ORDER {
            return Err(Error::Order { got: order, max: MAX_ORDER });
        }
        Ok(())
    }

    pub fn zero(nvars: usize, order: usize) -> Result<Jet> {
        Self::check_shape(nvars, order)?;
        let layout = Layout::get(nvars, order);
        let coeffs = vec![0.0; layout.exps.len()];
        Ok(Jet { layout, coeffs })
    }

    pub fn constant(value: f64, nvars: usize, order: usize) -> Result<Jet> {
        let mut j = Self::zero(nvars, order)?;
        j.coeffs[0] = value;
        Ok(j)
    }

    /// The coordinate function `x_index` expanded at `base`.
    pub fn variable(index: usize, base: f64, nvars: usize, order: usize) -> Result<Jet> {
        if index >= nvars {
            return Err(Error::OutOfRange { index, len: nvars });
        }
        let mut j = Self::constant(base, nvars, order)?;
        if order >= 1 {
            // degree-one monomials follow the constant, x_0 first
            j.coeffs[1 + index] = 1.0;
        }
        Ok(j)
    }

    /// Jets of all coordinate functions at `point`.
    pub fn variables(point: &[f64], order: usize) -> Result<Vec<Jet>> {
        (0..point.len()).map(|i| Jet::variable(i, point[i], point.len(), order)).collect()
    }

    /// Builds a jet from `(multi-index, coefficient)` pairs.
    pub fn from_terms(nvars: usize, order: usize, terms: &[(Vec<u8>, f64)]) -> Result<Jet> {
        let mut j = Self::zero(nvars, order)?;
        for (alpha, c) in terms {
            let k = j.position(alpha)?;
            j.coeffs[k] += c;
        }
        Ok(j)
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Multi-indices in storage order.
    pub fn multi_indices(&self) -> &[Vec<u8>] {
        &self.layout.exps
    }

    fn position(&self, alpha: &[u8]) -> Result<usize> {
        if alpha.len() != self.nvars() {
            return Err(Error::Invalid(format!(
                "multi-index of length {} for a jet in {} variables",
                alpha.len(),
                self.nvars()
            )));
        }
        let deg: usize = alpha.iter().map(|&a| a as usize).sum();
        if deg > self.order() {
            return Err(Error::Order { got: deg, max: self.order() });
        }
        Ok(self.layout.index[alpha])
    }

    pub fn coeff(&self, alpha: &[u8]) -> Result<f64> {
        Ok(self.coeffs[self.position(alpha)?])
    }

    /// The mixed partial `∂^α f` at the base point, i.e. `α! · coeff[α]`.
    pub fn partial(&self, alpha: &[u8]) -> Result<f64> {
        let c = self.coeff(alpha)?;
        Ok(c * alpha.iter().map(|&a| factorial(a as usize)).product::<f64>())
    }

    /// First derivative with respect to `var`; the result has one order less.
    pub fn derivative(&self, var: usize) -> Result<Jet> {
        if var >= self.nvars() {
            return Err(Error::OutOfRange { index: var, len: self.nvars() });
        }
        if self.order() == 0 {
            return Jet::zero(self.nvars(), 0);
        }
        let mut out = Jet::zero(self.nvars(), self.order() - 1)?;
        let mut shifted = vec![0u8; self.nvars()];
        for (k, alpha) in out.layout.clone().exps.iter().enumerate() {
            shifted.copy_from_slice(alpha);
            shifted[var] += 1;
            out.coeffs[k] = (alpha[var] as f64 + 1.0) * self.coeffs[self.layout.index[&shifted]];
        }
        Ok(out)
    }

    /// Drops all terms above `order`.
    pub fn truncate(&self, order: usize) -> Result<Jet> {
        if order > self.order() {
            return Err(Error::Order { got: order, max: self.order() });
        }
        let mut out = Jet::zero(self.nvars(), order)?;
        let n = out.coeffs.len();
        // graded layout: lower orders are a prefix
        out.coeffs.copy_from_slice(&self.coeffs[..n]);
        Ok(out)
    }

    /// Total-degree-`d` homogeneous part as `(multi-index, coefficient)` pairs.
    pub fn homogeneous(&self, d: usize) -> Vec<(&[u8], f64)> {
        self.layout
            .exps
            .iter()
            .zip(&self.coeffs)
            .zip(&self.layout.degree)
            .filter(|(_, &deg)| deg == d)
            .map(|((e, &c), _)| (e.as_slice(), c))
            .collect()
    }

    fn same_shape(&self, other: &Jet) -> Result<()> {
        if Arc::ptr_eq(&self.layout, &other.layout) {
            Ok(())
        } else {
            Err(Error::JetShape(self.nvars(), self.order(), other.nvars(), other.order()))
        }
    }

    fn expect_shape(&self, other: &Jet) {
        if let Err(e) = self.same_shape(other) {
            panic!("{e}");
        }
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet> {
        self.same_shape(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet> {
        self.same_shape(other)?;
        Ok(self.zip(other, |a, b| a - b))
    }

    pub fn try_mul(&self, other: &Jet) -> Result<Jet> {
        self.same_shape(other)?;
        let mut out = vec![0.0; self.coeffs.len()];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for &(j, k) in &self.layout.products[i] {
                out[k as usize] += a * other.coeffs[j as usize];
            }
        }
        Ok(Jet { layout: self.layout.clone(), coeffs: out })
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        self.same_shape(other)?;
        self.try_mul(&other.recip()?)
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f(a, b)).collect();
        Jet { layout: self.layout.clone(), coeffs }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet { layout: self.layout.clone(), coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    pub fn add_scalar(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut acc = self.clone().scale(0.0).add_scalar(1.0);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Composes the jet with a univariate function given its Taylor
    /// coefficients `c[k] = f^(k)(a0)/k!` at the constant term `a0`.
    pub fn compose(&self, c: &[f64]) -> Jet {
        let k = self.order();
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = self.scale(0.0).add_scalar(*c.get(k).unwrap_or(&0.0));
        for i in (0..k).rev() {
            acc = (&acc * &h).add_scalar(*c.get(i).unwrap_or(&0.0));
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet> {
        let a = self.value();
        if a == 0.0 || !a.is_finite() {
            return Err(Error::Domain("reciprocal of a jet with zero constant term".into()));
        }
        let c: Vec<f64> = (0..=self.order()).map(|k| (-1f64).powi(k as i32) * a.powi(-(k as i32) - 1)).collect();
        Ok(self.compose(&c))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(Error::Domain(format!("sqrt of a jet with constant term {a}")));
        }
        self.powf(0.5)
    }

    /// Real power; needs a positive constant term.
    pub fn powf(&self, p: f64) -> Result<Jet> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(Error::Domain(format!("power of a jet with constant term {a}")));
        }
        let mut c = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        for k in 0..=self.order() {
            c.push(binom * a.powf(p - k as f64));
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose(&c))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let c: Vec<f64> = (0..=self.order()).map(|k| e / factorial(k)).collect();
        self.compose(&c)
    }

    pub fn sin(&self) -> Jet {
        self.compose(&trig_coeffs(self.value(), self.order(), 0))
    }

    pub fn cos(&self) -> Jet {
        self.compose(&trig_coeffs(self.value(), self.order(), 1))
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let co: Vec<f64> = (0..=self.order()).map(|k| if k % 2 == 0 { s } else { c } / factorial(k)).collect();
        self.compose(&co)
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let co: Vec<f64> = (0..=self.order()).map(|k| if k % 2 == 0 { c } else { s } / factorial(k)).collect();
        self.compose(&co)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Jet) -> f64 {
        self.expect_shape(other);
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

// Taylor coefficients of sin (shift 0) or cos (shift 1) at a.
fn trig_coeffs(a: f64, order: usize, shift: usize) -> Vec<f64> {
    let (s, c) = a.sin_cos();
    let cycle = [s, c, -s, -c];
    (0..=order).map(|k| cycle[(k + shift) % 4] / factorial(k)).collect()
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.expect_shape(rhs);
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.expect_shape(rhs);
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.expect_shape(rhs);
        self.try_mul(rhs).expect("shapes checked")
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.expect_shape(rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

/// Default finite-difference step for a derivative of total order `order`.
pub fn default_fd_step(order: usize) -> f64 {
    match order {
        0..=2 => 1e-2,
        3 | 4 => 3e-2,
        _ => 6e-2,
    }
}

/// Finite-difference estimate of `∂^α f(point)`.
///
/// Tensor product of central difference stencils (half-step offsets for odd
/// orders), followed by one Richardson level with step ratio 2, so the error
/// is O(h⁴) per direction. `h = None` picks [`default_fd_step`].
pub fn fd_partial<F>(f: F, point: &[f64], alpha: &[u8], h: Option<f64>) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if alpha.len() != point.len() {
        return Err(Error::Invalid("multi-index length differs from the point dimension".into()));
    }
    let total: usize = alpha.iter().map(|&a| a as usize).sum();
    let h = h.unwrap_or_else(|| default_fd_step(total));
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let fine = central_difference(&f, point, alpha, h)?;
    let coarse = central_difference(&f, point, alpha, 2.0 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn central_difference<F>(f: &F, point: &[f64], alpha: &[u8], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    // per-direction (offset, weight) lists
    let stencils: Vec<Vec<(f64, f64)>> = alpha
        .iter()
        .map(|&m| {
            let m = m as usize;
            (0..=m)
                .map(|j| {
                    let w = if j % 2 == 0 { 1.0 } else { -1.0 } * binomial(m, j) / h.powi(m as i32);
                    ((m as f64 / 2.0 - j as f64) * h, w)
                })
                .collect()
        })
        .collect();
    let mut sum = 0.0;
    let mut idx = vec![0usize; alpha.len()];
    let mut x = point.to_vec();
    loop {
        let mut w = 1.0;
        for (d, &i) in idx.iter().enumerate() {
            let (off, wd) = stencils[d][i];
            x[d] = point[d] + off;
            w *= wd;
        }
        let v = f(&x);
        if !v.is_finite() {
            return Err(Error::Domain(format!("non-finite function value at {x:?}")));
        }
        sum += w * v;
        // odometer over the stencil product
        let mut d = 0;
        loop {
            if d == idx.len() {
                return Ok(sum);
            }
            idx[d] += 1;
            if idx[d] < stencils[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_jets() {
        let x = Jet::variable(0, 2.0, 2, 3).unwrap();
        assert_eq!(x.coeff(&[0, 0]).unwrap(), 2.0);
        assert_eq!(x.coeff(&[1, 0]).unwrap(), 1.0);
        assert_eq!(x.coeffs().iter().filter(|c| **c != 0.0).count(), 2);
        let y = Jet::variable(1, 0.0, 2, 2).unwrap();
        assert_eq!(y.coeff(&[0, 1]).unwrap(), 1.0);
        assert_eq!(y.coeffs().iter().filter(|c| **c != 0.0).count(), 1);
        assert!(matches!(Jet::variable(3, 0.0, 2, 2), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn layout_is_graded() {
        let j = Jet::zero(3, 4).unwrap();
        assert_eq!(j.coeffs().len(), jet_len(3, 4));
        let degs: Vec<usize> = j.multi_indices().iter().map(|e| e.iter().map(|&a| a as usize).sum()).collect();
        assert!(degs.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(j.multi_indices()[1], vec![1, 0, 0]);
    }

    #[test]
    fn univariate_examples() {
        let x = Jet::variable(0, 0.0, 1, 3).unwrap();
        let one_plus = x.add_scalar(1.0);
        let sq = one_plus.truncate(2).unwrap().powi(2);
        assert_eq!(sq.coeffs(), &[1.0, 2.0, 1.0]);
        let r = one_plus.recip().unwrap();
        assert_eq!(r.coeffs(), &[1.0, -1.0, 1.0, -1.0]);
        let s = Jet::variable(0, 0.0, 1, 5).unwrap().sin();
        let want = [0.0, 1.0, 0.0, -1.0 / 6.0, 0.0, 1.0 / 120.0];
        for (a, b) in s.coeffs().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn partials() {
        let x = Jet::variable(0, 3.0, 1, 2).unwrap();
        let x2 = &x * &x;
        assert_eq!(x2.partial(&[2]).unwrap(), 2.0);
        assert_eq!(x2.partial(&[0]).unwrap(), 9.0);
        assert!(x2.partial(&[3]).is_err());
        let v = Jet::variables(&[0.0, 0.0], 4).unwrap();
        let e = (&v[0] * &v[1]).exp();
        assert!((e.partial(&[2, 2]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let z = Jet::variable(0, 0.0, 1, 2).unwrap();
        assert!(z.recip().is_err());
        assert!(z.sqrt().is_err());
        let one = Jet::constant(1.0, 1, 2).unwrap();
        assert!(one.try_div(&z).is_err());
        let other = Jet::constant(1.0, 2, 2).unwrap();
        assert!(one.try_add(&other).is_err());
        assert!(Jet::zero(2, 7).is_err());
    }

    #[test]
    fn derivative_and_truncate() {
        let v = Jet::variables(&[0.5, -0.25], 4).unwrap();
        let f = (&v[0] * &v[1]).sin();
        let dfx = f.derivative(0).unwrap();
        assert_eq!(dfx.order(), 3);
        // ∂x∂y of sin(xy) = cos(xy) - xy sin(xy)
        let xy: f64 = 0.5 * -0.25;
        let want = xy.cos() - xy * xy.sin();
        assert!((dfx.partial(&[0, 1]).unwrap() - want).abs() < 1e-14);
        let t = f.truncate(1).unwrap();
        assert_eq!(t.coeffs(), &f.coeffs()[..3]);
    }

    #[test]
    fn fd_examples() {
        let cubic = |x: &[f64]| x[0].powi(3);
        assert!((fd_partial(cubic, &[1.0], &[3], Some(1e-2)).unwrap() - 6.0).abs() < 1e-6);
        let bil = |x: &[f64]| x[0] * x[1];
        assert!((fd_partial(bil, &[0.3, 0.7], &[1, 1], Some(1e-3)).unwrap() - 1.0).abs() < 1e-8);
        let bad = |_: &[f64]| f64::NAN;
        assert!(fd_partial(bad, &[0.0], &[1], None).is_err());
    }

    #[test]
    fn exp_product_matches_fd_to_order_four() {
        let f = |x: &[f64]| (x[0] * x[1]).exp();
        let p = [0.0, 0.0];
        let v = Jet::variables(&p, 4).unwrap();
        let j = (&v[0] * &v[1]).exp();
        for alpha in j.multi_indices().to_vec() {
            let exact = j.partial(&alpha).unwrap();
            let approx = fd_partial(f, &p, &alpha, None).unwrap();
            assert!((exact - approx).abs() < 1e-6, "{alpha:?}: {exact} vs {approx}");
        }
    }
}
