use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::jets::Jet;
use crate::linalg::{min_eigenvalue, Mat};
use crate::poly::{Monomial, Poly};

/// Axis-aligned box in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn cube(dim: usize, half: f64) -> Domain {
        Domain { lo: vec![-half; dim], hi: vec![half; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.lo.len()
            && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (lo, hi))| *x >= lo - 1e-12 && *x <= hi + 1e-12)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lo.len() != dim || self.hi.len() != dim {
            return invalid(format!("domain box must have {dim} coordinates"));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h)) {
            return invalid("domain box needs lo < hi in every coordinate");
        }
        Ok(())
    }

    /// Tensor grid with `per_axis` points per coordinate.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::new();
        let mut idx = vec![0usize; n];
        loop {
            out.push(
                (0..n)
                    .map(|d| {
                        let f = if per_axis == 1 { 0.5 } else { idx[d] as f64 / (per_axis - 1) as f64 };
                        self.lo[d] + f * (self.hi[d] - self.lo[d])
                    })
                    .collect(),
            );
            let mut d = 0;
            loop {
                if d == n {
                    return out;
                }
                idx[d] += 1;
                if idx[d] < per_axis {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Euclidean,
    // δ_ij / (1 + κ|x|²/4)²
    ConstantCurvature(f64),
    // upper triangle, row-major
    Polynomial(Vec<Poly>),
}

/// A Riemannian metric on a box in R^n, n ∈ {2, 3, 4}.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    dim: usize,
    domain: Domain,
    kind: Kind,
    label: String,
}

/// Metric components as jets, row-major `n × n`.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub dim: usize,
    pub entries: Vec<Jet>,
}

impl MetricJet {
    pub fn get(&self, i: usize, j: usize) -> &Jet {
        &self.entries[i * self.dim + j]
    }

    pub fn value(&self) -> Mat {
        Mat::from_fn(self.dim, self.dim, |i, j| self.get(i, j).value())
    }
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

fn check_dim(dim: usize) -> Result<()> {
    if !(2..=4).contains(&dim) {
        return invalid(format!("metric dimension must be 2, 3 or 4, got {dim}"));
    }
    Ok(())
}

impl MetricField {
    pub fn euclidean(dim: usize) -> Result<MetricField> {
        check_dim(dim)?;
        Ok(MetricField { dim, domain: Domain::cube(dim, 1.0), kind: Kind::Euclidean, label: "euclidean".into() })
    }

    /// Conformally flat model of constant sectional curvature `kappa`:
    /// `g = δ / (1 + κ|x|²/4)²`.
    pub fn constant_curvature(dim: usize, kappa: f64) -> Result<MetricField> {
        check_dim(dim)?;
        if !kappa.is_finite() {
            return invalid("curvature must be finite");
        }
        let half = if kappa < 0.0 {
            // keep the box corners inside the ball |x| < 2/√(-κ)
            (0.95 * 2.0 / (-kappa).sqrt() / (dim as f64).sqrt()).min(1.0)
        } else {
            1.0
        };
        Ok(MetricField {
            dim,
            domain: Domain::cube(dim, half),
            kind: Kind::ConstantCurvature(kappa),
            label: format!("constant_curvature({kappa})"),
        })
    }

    /// `[[1, -t, -x₂], [-t, t²+1, x₂t], [-x₂, x₂t, x₂²+1]]` in `(x₁, x₂, t)`;
    /// its geodesics are the graphs bent by Bourgain's phase.
    pub fn appendix_bourgain() -> MetricField {
        let p = |pairs: &[(f64, &[u32])]| Poly::from_pairs(3, pairs).expect("valid literal");
        let entries = vec![
            p(&[(1.0, &[0, 0, 0])]),
            p(&[(-1.0, &[0, 0, 1])]),
            p(&[(-1.0, &[0, 1, 0])]),
            p(&[(1.0, &[0, 0, 2]), (1.0, &[0, 0, 0])]),
            p(&[(1.0, &[0, 1, 1])]),
            p(&[(1.0, &[0, 2, 0]), (1.0, &[0, 0, 0])]),
        ];
        MetricField {
            dim: 3,
            domain: Domain::cube(3, 1.0),
            kind: Kind::Polynomial(entries),
            label: "appendix_bourgain".into(),
        }
    }

    /// Identity metric except `g₃₃ = p(x₁, x₂, t)`; required to stay ≥ ½ on the domain.
    pub fn perturbed(g33: Poly) -> Result<MetricField> {
        Self::perturbed_on(g33, Domain::cube(3, 1.0))
    }

    pub fn perturbed_on(g33: Poly, domain: Domain) -> Result<MetricField> {
        if g33.nvars() != 3 {
            return invalid("perturbed g33 must be a polynomial in (x1, x2, t)");
        }
        domain.validate(3)?;
        for q in domain.grid(9) {
            let v = g33.eval(&q);
            if !(v >= 0.5) {
                return invalid(format!("perturbed g33 = {v} < 1/2 at {q:?}"));
            }
        }
        let one = Poly::constant(3, 1.0);
        let zero = Poly::constant(3, 0.0);
        let entries = vec![one.clone(), zero.clone(), zero.clone(), one, zero, g33];
        Ok(MetricField { dim: 3, domain, kind: Kind::Polynomial(entries), label: "perturbed".into() })
    }

    /// The chaotic test metric `g₃₃ = 1 + x₁² + 2t·x₁x₂`, on a box where it stays ≥ ½.
    pub fn perturbed_standard() -> MetricField {
        let g33 = Poly::from_pairs(3, &[(1.0, &[0, 0, 0]), (1.0, &[2, 0, 0]), (2.0, &[1, 1, 1])]).expect("literal");
        Self::perturbed_on(g33, Domain::cube(3, 0.6)).expect("g33 ≥ 1/2 on [-0.6, 0.6]³")
    }

    /// Polynomial entries given as the upper triangle in row-major order.
    pub fn user_polynomial(dim: usize, upper: Vec<Poly>, domain: Domain) -> Result<MetricField> {
        check_dim(dim)?;
        domain.validate(dim)?;
        if upper.len() != dim * (dim + 1) / 2 {
            return invalid(format!("expected {} upper-triangular entries", dim * (dim + 1) / 2));
        }
        if upper.iter().any(|p| p.nvars() != dim) {
            return invalid("every metric entry must be a polynomial in the chart coordinates");
        }
        let m = MetricField { dim, domain, kind: Kind::Polynomial(upper), label: "user_polynomial".into() };
        for q in m.domain.grid(5) {
            let lmin = min_eigenvalue(&m.eval(&q)?);
            if !(lmin >= 1e-8) {
                return invalid(format!("metric not positive definite at {q:?} (min eigenvalue {lmin:e})"));
            }
        }
        Ok(m)
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<MetricField> {
        domain.validate(self.dim)?;
        if let Kind::ConstantCurvature(k) = self.kind {
            if k < 0.0 {
                let r2: f64 = domain.lo.iter().zip(&domain.hi).map(|(l, h)| l.abs().max(h.abs()).powi(2)).sum();
                if 1.0 + k * r2 / 4.0 <= 0.0 {
                    return invalid("domain reaches the boundary of the hyperbolic ball");
                }
            }
        }
        if let Kind::Polynomial(_) = self.kind {
            for q in domain.grid(5) {
                let lmin = min_eigenvalue(&self.eval_unchecked(&q));
                if !(lmin >= 1e-8) {
                    return invalid(format!("metric not positive definite at {q:?}"));
                }
            }
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Curvature parameter of the constant-curvature models.
    pub fn constant_kappa(&self) -> Option<f64> {
        match self.kind {
            Kind::Euclidean => Some(0.0),
            Kind::ConstantCurvature(k) => Some(k),
            Kind::Polynomial(_) => None,
        }
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return invalid(format!("point has {} coordinates, metric dimension is {}", p.len(), self.dim));
        }
        if !self.domain.contains(p) || p.iter().any(|x| !x.is_finite()) {
            return Err(Error::DomainExit(p.to_vec()));
        }
        Ok(())
    }

    pub fn eval(&self, p: &[f64]) -> Result<Mat> {
        self.check_point(p)?;
        Ok(self.eval_unchecked(p))
    }

    fn eval_unchecked(&self, p: &[f64]) -> Mat {
        let n = self.dim;
        match &self.kind {
            Kind::Euclidean => Mat::identity(n, n),
            Kind::ConstantCurvature(k) => {
                let r2: f64 = p.iter().map(|x| x * x).sum();
                let c = 1.0 + k * r2 / 4.0;
                Mat::identity(n, n) / (c * c)
            }
            Kind::Polynomial(e) => Mat::from_fn(n, n, |i, j| e[upper_index(n, i, j)].eval(p)),
        }
    }

    pub fn jet_eval(&self, p: &[f64], order: usize) -> Result<MetricJet> {
        self.check_point(p)?;
        let n = self.dim;
        let vars = Jet::variables(p, order)?;
        let zero = vars[0].scale(0.0);
        let entries = match &self.kind {
            Kind::Euclidean => {
                (0..n * n).map(|k| if k / n == k % n { zero.add_scalar(1.0) } else { zero.clone() }).collect()
            }
            Kind::ConstantCurvature(k) => {
                let mut r2 = zero.clone();
                for v in &vars {
                    r2 += &(v * v);
                }
                let c = r2.scale(k / 4.0).add_scalar(1.0);
                if !(c.value() > 0.0) {
                    return Err(Error::DomainExit(p.to_vec()));
                }
                let lam = (&c * &c).recip()?;
                (0..n * n).map(|k| if k / n == k % n { lam.clone() } else { zero.clone() }).collect()
            }
            Kind::Polynomial(e) => {
                let upper: Vec<Jet> = e.iter().map(|q| q.eval_jet(&vars)).collect();
                (0..n * n).map(|k| upper[upper_index(n, k / n, k % n)].clone()).collect()
            }
        };
        Ok(MetricJet { dim: n, entries })
    }
}

/// Declarative metric description, as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    ConstantCurvature {
        dim: usize,
        kappa: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    AppendixBourgain {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    Perturbed {
        g33: Vec<Monomial>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Domain>,
    },
    UserPolynomial {
        dim: usize,
        /// upper triangle, row-major
        entries: Vec<Vec<Monomial>>,
        domain: Domain,
    },
}

impl MetricSpec {
    pub fn build(&self) -> Result<MetricField> {
        let with = |m: MetricField, d: &Option<Domain>| match d {
            Some(d) => m.with_domain(d.clone()),
            None => Ok(m),
        };
        match self {
            MetricSpec::Euclidean { dim, domain } => with(MetricField::euclidean(*dim)?, domain),
            MetricSpec::ConstantCurvature { dim, kappa, domain } => {
                with(MetricField::constant_curvature(*dim, *kappa)?, domain)
            }
            MetricSpec::AppendixBourgain { domain } => with(MetricField::appendix_bourgain(), domain),
            MetricSpec::Perturbed { g33, domain } => {
                let p = Poly::new(3, g33.clone())?;
                MetricField::perturbed_on(p, domain.clone().unwrap_or_else(|| Domain::cube(3, 0.6)))
            }
            MetricSpec::UserPolynomial { dim, entries, domain } => {
                let polys = entries.iter().map(|e| Poly::new(*dim, e.clone())).collect::<Result<Vec<_>>>()?;
                MetricField::user_polynomial(*dim, polys, domain.clone())
            }
        }
    }
}

/// Looks up a model metric by name with default parameters.
pub fn metric_library(name: &str, dim: usize, kappa: f64) -> Result<MetricField> {
    match name {
        "euclidean" => MetricField::euclidean(dim),
        "constant_curvature" => MetricField::constant_curvature(dim, kappa),
        "appendix_bourgain" => Ok(MetricField::appendix_bourgain()),
        "perturbed" => Ok(MetricField::perturbed_standard()),
        other => Err(Error::Invalid(format!("unknown metric '{other}'"))),
    }
}
