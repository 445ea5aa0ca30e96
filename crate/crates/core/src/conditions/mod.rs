//! Decision procedures on phases and metrics, each returning a [`ConditionReport`].

mod bourgain;
mod chaotic;
mod contact;
mod feasibility;
mod hormander;
mod phase;
mod wolff;

pub use bourgain::{bourgain_geodesic, bourgain_residual, span_residual, BourgainOptions, SpanResidual};
pub use chaotic::{chaotic_check, fibonacci_directions, quadratic_pair, ChaoticOptions, QuadraticPair};
pub use contact::{contact_matrix, contact_order, rank4_ratio, reported_order, ContactOptions};
pub use feasibility::{phase_to_metric_feasibility, FeasibilityOptions};
pub use hormander::{hormander_check, Hormander};
pub use phase::{PhaseField, DISTANCE_FD_STEP, DISTANCE_SHOOTING_STEPS, PHASE_NAMES};
pub use wolff::{
    nelder_mead, wolff_functional, wolff_infimum, wolff_report, SimplexResult, WolffCurve, WolffInfimum, WolffOptions,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Residuals below this hold.
pub const TAU_HOLD: f64 = 1e-5;
/// Residuals above this fail; between the two the verdict is degenerate.
pub const TAU_FAIL: f64 = 1e-3;

/// Documentation-only exponents from the surrounding L^p theory; no computation uses them.
pub const EXPONENT_NOTES: &str = "p_GWZ, q_HRZ, p_HRZ, d_HRZ: asymptotic exponents of the L^p and Nikodym \
    theorems these conditions feed; not reproduced at desk scale";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Degenerate,
}

/// How a verdict follows from residuals and thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rule {
    /// `residual < tau_hold` holds, `> tau_fail` fails, otherwise degenerate.
    Band { residual: String },
    /// Holds iff every listed residual exceeds the threshold of the same name.
    AllAbove { residuals: Vec<String> },
    /// Holds iff some listed residual exceeds the threshold of the same name.
    AnyAbove { residuals: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Diagnostic {
    Number(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
    Text(String),
}

impl From<f64> for Diagnostic {
    fn from(x: f64) -> Self {
        Diagnostic::Number(x)
    }
}

impl From<&str> for Diagnostic {
    fn from(s: &str) -> Self {
        Diagnostic::Text(s.to_string())
    }
}

impl From<String> for Diagnostic {
    fn from(s: String) -> Self {
        Diagnostic::Text(s)
    }
}

impl From<Vec<f64>> for Diagnostic {
    fn from(v: Vec<f64>) -> Self {
        Diagnostic::Vector(v)
    }
}

impl From<&Mat> for Diagnostic {
    fn from(m: &Mat) -> Self {
        Diagnostic::Matrix((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionReport {
    pub verifier: String,
    pub points: Vec<Vec<f64>>,
    pub residuals: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    pub rule: Rule,
    pub verdict: Verdict,
    pub diagnostics: BTreeMap<String, Diagnostic>,
}

pub fn decide(rule: &Rule, residuals: &BTreeMap<String, f64>, thresholds: &BTreeMap<String, f64>) -> Result<Verdict> {
    let get = |map: &BTreeMap<String, f64>, k: &str, what: &str| -> Result<f64> {
        map.get(k).copied().ok_or_else(|| Error::Invalid(format!("report lacks {what} `{k}`")))
    };
    Ok(match rule {
        Rule::Band { residual } => {
            let r = get(residuals, residual, "residual")?;
            if r < get(thresholds, "tau_hold", "threshold")? {
                Verdict::Holds
            } else if r > get(thresholds, "tau_fail", "threshold")? {
                Verdict::Fails
            } else {
                Verdict::Degenerate
            }
        }
        Rule::AllAbove { residuals: keys } | Rule::AnyAbove { residuals: keys } => {
            let mut above = Vec::with_capacity(keys.len());
            for k in keys {
                above.push(get(residuals, k, "residual")? > get(thresholds, k, "threshold")?);
            }
            let ok = match rule {
                Rule::AllAbove { .. } => above.iter().all(|a| *a),
                _ => above.iter().any(|a| *a),
            };
            if ok {
                Verdict::Holds
            } else {
                Verdict::Fails
            }
        }
    })
}

/// Builder that checks finiteness and derives the verdict from the rule.
#[derive(Debug, Clone)]
pub struct ReportBuilder {
    verifier: String,
    points: Vec<Vec<f64>>,
    residuals: BTreeMap<String, f64>,
    thresholds: BTreeMap<String, f64>,
    diagnostics: BTreeMap<String, Diagnostic>,
}

impl ReportBuilder {
    pub fn new(verifier: &str) -> ReportBuilder {
        ReportBuilder {
            verifier: verifier.to_string(),
            points: Vec::new(),
            residuals: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn point(mut self, p: Vec<f64>) -> Self {
        self.points.push(p);
        self
    }

    pub fn residual(mut self, k: &str, v: f64) -> Self {
        self.residuals.insert(k.to_string(), v);
        self
    }

    pub fn threshold(mut self, k: &str, v: f64) -> Self {
        self.thresholds.insert(k.to_string(), v);
        self
    }

    pub fn band(self, tau_hold: f64, tau_fail: f64) -> Self {
        self.threshold("tau_hold", tau_hold).threshold("tau_fail", tau_fail)
    }

    pub fn diag(mut self, k: &str, v: impl Into<Diagnostic>) -> Self {
        self.diagnostics.insert(k.to_string(), v.into());
        self
    }

    pub fn build(self, rule: Rule) -> Result<ConditionReport> {
        for (k, v) in self.residuals.iter().chain(&self.thresholds) {
            if !v.is_finite() {
                return Err(Error::Invalid(format!("{}: non-finite value for `{k}`", self.verifier)));
            }
        }
        if self.points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("{}: non-finite base point", self.verifier)));
        }
        let verdict = decide(&rule, &self.residuals, &self.thresholds)?;
        Ok(ConditionReport {
            verifier: self.verifier,
            points: self.points,
            residuals: self.residuals,
            thresholds: self.thresholds,
            rule,
            verdict,
            diagnostics: self.diagnostics,
        })
    }
}

impl ConditionReport {
    /// Re-derives the verdict from the stored residuals and thresholds.
    pub fn recompute_verdict(&self) -> Result<Verdict> {
        decide(&self.rule, &self.residuals, &self.thresholds)
    }

    pub fn residual(&self, k: &str) -> Option<f64> {
        self.residuals.get(k).copied()
    }
}

fn check_band(tau_hold: f64, tau_fail: f64) -> Result<()> {
    if !(tau_hold > 0.0) || !(tau_fail >= tau_hold) || !tau_fail.is_finite() {
        return Err(Error::Invalid(format!("need 0 < tau_hold ≤ tau_fail, got {tau_hold}, {tau_fail}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_rule() {
        let mk = |r: f64| {
            ReportBuilder::new("t").residual("r", r).band(TAU_HOLD, TAU_FAIL).build(Rule::Band { residual: "r".into() })
        };
        assert_eq!(mk(1e-6).unwrap().verdict, Verdict::Holds);
        assert_eq!(mk(1e-4).unwrap().verdict, Verdict::Degenerate);
        assert_eq!(mk(1e-2).unwrap().verdict, Verdict::Fails);
        assert!(mk(f64::NAN).is_err());
    }

    #[test]
    fn threshold_rules() {
        let b = ReportBuilder::new("t").residual("a", 2.0).residual("b", 0.5).threshold("a", 1.0).threshold("b", 1.0);
        let keys = vec!["a".to_string(), "b".to_string()];
        assert_eq!(b.clone().build(Rule::AllAbove { residuals: keys.clone() }).unwrap().verdict, Verdict::Fails);
        assert_eq!(b.build(Rule::AnyAbove { residuals: keys }).unwrap().verdict, Verdict::Holds);
    }
}
