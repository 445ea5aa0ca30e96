use super::{ConditionReport, PhaseField, ReportBuilder, Rule, Verdict};
use crate::error::Result;
use crate::linalg::{singular_values, wedge, Mat, Vector};

/// Outcome of the nondegeneracy check together with the unit transverse field.
#[derive(Debug, Clone)]
pub struct Hormander {
    pub report: ConditionReport,
    /// Euclidean-unit wedge of the columns of the mixed matrix.
    pub g0: Vector,
    /// `∂_{x_k}∂_{y_i}φ`
    pub mixed: Mat,
}

impl Hormander {
    pub fn holds(&self) -> bool {
        self.report.verdict == Verdict::Holds
    }
}

/// Rank of the mixed Hessian (H1) and curvature along `G₀` (H2) at `(x; y)`.
pub fn hormander_check(phi: &PhaseField, x: &[f64], y: &[f64]) -> Result<Hormander> {
    let n = phi.dim();
    let mixed = phi.mixed(x, y)?;
    let scale = mixed.norm();
    let sigma_min = singular_values(&mixed.rows(0, n - 1).into_owned()).last().copied().unwrap_or(0.0);
    let w = wedge(&mixed);
    let g0 = if w.norm() > 0.0 { &w / w.norm() } else { w.clone() };
    let curv = phi.hess_y_line(x, g0.as_slice(), y, 1)?.remove(1);
    let det = curv.determinant();
    let h2_scale = curv.norm().max(scale).powi(n as i32 - 1);
    let report = ReportBuilder::new("hormander_check")
        .point([x, y].concat())
        .residual("h1_sigma_min", sigma_min)
        .residual("h2_abs_det", det.abs())
        .threshold("h1_sigma_min", 1e-6 * scale)
        .threshold("h2_abs_det", 1e-6 * h2_scale)
        .diag("g0", g0.as_slice().to_vec())
        .diag("h2_det", det)
        .diag("mixed", &mixed)
        .build(Rule::AllAbove { residuals: vec!["h1_sigma_min".into(), "h2_abs_det".into()] })?;
    Ok(Hormander { report, g0, mixed })
}
