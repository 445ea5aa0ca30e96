//! Object construction and the `--object` shorthand.

use oscgeo::conditions::PhaseField;
use oscgeo::poly::{Monomial, Poly};
use oscgeo::{Error, MetricField, MetricSpec, Result};

use crate::scenario::{ObjectSpec, PhaseSpec};

pub enum Object {
    Metric(MetricField),
    Phase(PhaseField),
}

impl Object {
    pub fn build(spec: &ObjectSpec) -> Result<Object> {
        Ok(match spec {
            ObjectSpec::Metric(m) => Object::Metric(m.build()?),
            ObjectSpec::Phase(PhaseSpec::Named { name }) => Object::Phase(PhaseField::named(name)?),
            ObjectSpec::Phase(PhaseSpec::Polynomial { terms, label }) => {
                Object::Phase(PhaseField::polynomial(3, Poly::new(5, terms.clone())?, label)?)
            }
            ObjectSpec::Phase(PhaseSpec::Distance { metric, epsilon }) => {
                Object::Phase(PhaseField::distance(metric.build()?, *epsilon)?)
            }
        })
    }

    pub fn label(&self) -> &str {
        match self {
            Object::Metric(m) => m.label(),
            Object::Phase(p) => p.label(),
        }
    }

    pub fn metric(&self, task: &str) -> Result<&MetricField> {
        match self {
            Object::Metric(m) => Ok(m),
            Object::Phase(_) => Err(Error::Invalid(format!("{task} needs a metric object"))),
        }
    }

    pub fn phase(&self, task: &str) -> Result<&PhaseField> {
        match self {
            Object::Phase(p) => Ok(p),
            Object::Metric(_) => Err(Error::Invalid(format!("{task} needs a phase object"))),
        }
    }
}

fn g33_standard() -> Vec<Monomial> {
    vec![
        Monomial { coeff: 1.0, powers: vec![0, 0, 0] },
        Monomial { coeff: 1.0, powers: vec![2, 0, 0] },
        Monomial { coeff: 2.0, powers: vec![1, 1, 1] },
    ]
}

/// Parses `euclidean`, `sphere`, `hyperbolic`, `constant_curvature:κ`, `perturbed`,
/// `appendix_bourgain`, `phase:NAME` or an inline JSON object declaration.
/// Shorthand metrics are three-dimensional.
pub fn parse_object(s: &str) -> std::result::Result<ObjectSpec, String> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| format!("inline object: {e}"));
    }
    let cc = |kappa: f64| ObjectSpec::Metric(MetricSpec::ConstantCurvature { dim: 3, kappa, domain: None });
    Ok(match s {
        "euclidean" => ObjectSpec::Metric(MetricSpec::Euclidean { dim: 3, domain: None }),
        "sphere" => cc(1.0),
        "hyperbolic" => cc(-1.0),
        "perturbed" => ObjectSpec::Metric(MetricSpec::Perturbed { g33: g33_standard(), domain: None }),
        "appendix_bourgain" => ObjectSpec::Metric(MetricSpec::AppendixBourgain { domain: None }),
        _ => {
            if let Some(k) = s.strip_prefix("constant_curvature:") {
                cc(k.parse().map_err(|_| format!("bad curvature `{k}`"))?)
            } else if let Some(name) = s.strip_prefix("phase:") {
                ObjectSpec::Phase(PhaseSpec::Named { name: name.to_string() })
            } else {
                return Err(format!("unknown object `{s}`"));
            }
        }
    })
}
