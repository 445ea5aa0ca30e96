use super::{check_band, hormander_check, ConditionReport, PhaseField, ReportBuilder, Rule, TAU_FAIL, TAU_HOLD};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_inner, wedge, Mat, Vector};
use crate::riemann::{christoffel, MetricField};

/// Distance of `M₂` from the span of `M₁`, relative to `‖M₂‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanResidual {
    pub r: f64,
    pub lambda: f64,
    /// `M₁` vanished while `M₂` did not.
    pub undefined_multiple: bool,
}

pub fn span_residual(m1: &Mat, m2: &Mat, eta: f64) -> SpanResidual {
    let (n1, n2) = (m1.norm(), m2.norm());
    if n1 <= eta {
        return if n2 <= eta {
            SpanResidual { r: 0.0, lambda: 0.0, undefined_multiple: false }
        } else {
            SpanResidual { r: 1.0, lambda: 0.0, undefined_multiple: true }
        };
    }
    let lambda = frobenius_inner(m2, m1) / (n1 * n1);
    if n2 <= eta {
        return SpanResidual { r: 0.0, lambda, undefined_multiple: false };
    }
    SpanResidual { r: (m2 - m1 * lambda).norm() / n2.max(eta), lambda, undefined_multiple: false }
}

#[derive(Debug, Clone, Copy)]
pub struct BourgainOptions {
    pub tau_hold: f64,
    pub tau_fail: f64,
    /// Also run the finite-difference formulation on the distance phase.
    pub cross_check: bool,
}

impl Default for BourgainOptions {
    fn default() -> Self {
        BourgainOptions { tau_hold: TAU_HOLD, tau_fail: TAU_FAIL, cross_check: false }
    }
}

fn finish(
    name: &str,
    point: Vec<f64>,
    m1: &Mat,
    m2: &Mat,
    hess: &Mat,
    opts: &BourgainOptions,
    extra: impl FnOnce(ReportBuilder) -> ReportBuilder,
) -> Result<ConditionReport> {
    check_band(opts.tau_hold, opts.tau_fail)?;
    let eta = 1e-9 * hess.norm();
    let s = span_residual(m1, m2, eta);
    let mut b = ReportBuilder::new(name)
        .point(point)
        .residual("r", s.r)
        .band(opts.tau_hold, opts.tau_fail)
        .threshold("eta", eta)
        .diag("lambda", s.lambda)
        .diag("m1", m1)
        .diag("m2", m2);
    if s.undefined_multiple {
        b = b.diag("flag", "first derivative vanishes while the second does not");
    }
    extra(b).build(Rule::Band { residual: "r".into() })
}

/// `(G·∇_x)∇²_yφ` and `(G·∇_x)²∇²_yφ` for the unit transverse field `G(x)`
/// (second application includes the derivative of the field along itself).
fn directional_pair(phi: &PhaseField, x: &[f64], y: &[f64], g0: &Vector) -> Result<(Mat, Mat)> {
    let hl = phi.hess_y_line(x, g0.as_slice(), y, 2)?;
    let ml = phi.mixed_line(x, g0.as_slice(), y, 1)?;
    let w = wedge(&ml[0]);
    let mut dw = Vector::zeros(w.len());
    for c in 0..ml[0].ncols() {
        let mut mc = ml[0].clone();
        mc.set_column(c, &ml[1].column(c));
        dw += wedge(&mc);
    }
    let g = &w / w.norm();
    let dg = (&dw - &g * g.dot(&dw)) / w.norm();
    let companion = phi.hess_y_line(x, dg.as_slice(), y, 1)?.remove(1);
    Ok((hl[1].clone(), &hl[2] + companion))
}

/// Whether the second derivative of `∇²_yφ` along `G₀` is a multiple of the first.
pub fn bourgain_residual(phi: &PhaseField, x: &[f64], y: &[f64], opts: &BourgainOptions) -> Result<ConditionReport> {
    let h = hormander_check(phi, x, y)?;
    if !h.holds() {
        return Err(Error::Invalid("nondegeneracy conditions fail at the base point".into()));
    }
    let (m1, m2) = directional_pair(phi, x, y, &h.g0)?;
    let hess = phi.hess_y(x, y)?;
    finish("bourgain_residual", [x, y].concat(), &m1, &m2, &hess, opts, |b| {
        b.diag("g0", h.g0.as_slice().to_vec()).diag("phase", phi.label())
    })
}

/// The same condition for `dist((x, t), (y, ε))`, with the derivatives along the
/// transverse field taken from the Jacobi series along the connecting geodesic.
pub fn bourgain_geodesic(
    m: &MetricField,
    x0: &[f64],
    y0: &[f64],
    eps: f64,
    opts: &BourgainOptions,
) -> Result<ConditionReport> {
    let n = m.dim();
    let phi = PhaseField::distance(m.clone(), eps)?;
    let d = phi.distance_data(x0, y0, 2)?;
    let sys = &d.system;
    let p = d.end_contraction.rows(0, n - 1).into_owned();
    let d1 = &p * &sys.series[1] * p.transpose();
    let d2 = &p * (&sys.series[2] * 2.0) * p.transpose();
    let v = Vector::from_column_slice(&sys.geodesic.start().vel);
    let acc = -Vector::from_vec(christoffel(m, x0)?.contract(v.as_slice(), v.as_slice()));
    let speed = v.norm();
    let sp = 1.0 / speed;
    let spp = -v.dot(&acc) / speed.powi(4);
    let m1 = &d1 * sp;
    let m2 = &d2 * (sp * sp) + &d1 * spp;
    let hess = d.hess_end.view((0, 0), (n - 1, n - 1)).into_owned();
    let cross = if opts.cross_check {
        let other = bourgain_residual(&phi, x0, y0, &BourgainOptions { cross_check: false, ..*opts })?;
        Some(other.residuals["r"])
    } else {
        None
    };
    let mut point = x0.to_vec();
    point.extend_from_slice(y0);
    point.push(eps);
    let report = finish("bourgain_geodesic", point, &m1, &m2, &hess, opts, |b| {
        let b = b.diag("distance", d.value).diag("metric", m.label());
        match cross {
            Some(r) => b.diag("cross_check_r", r),
            None => b,
        }
    })?;
    if let Some(r) = cross {
        let mut report = report;
        let diff = (report.residuals["r"] - r).abs();
        report.diagnostics.insert("cross_check_discrepancy".into(), diff.into());
        return Ok(report);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::Verdict;

    #[test]
    fn library_phases() {
        let o = BourgainOptions::default();
        let p = bourgain_residual(&PhaseField::named("paraboloid").unwrap(), &[0.0; 3], &[0.0; 2], &o).unwrap();
        assert_eq!(p.residuals["r"], 0.0);
        assert_eq!(p.verdict, Verdict::Holds);
        let b = bourgain_residual(&PhaseField::named("bourgain").unwrap(), &[0.0; 3], &[0.0; 2], &o).unwrap();
        assert_eq!(b.residuals["r"], 1.0);
        assert_eq!(b.verdict, Verdict::Fails);
        assert_eq!(b.diagnostics["m2"], (&Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])).into());
    }

    #[test]
    fn span_conventions() {
        let z = Mat::zeros(2, 2);
        let i = Mat::identity(2, 2);
        assert_eq!(span_residual(&z, &z, 0.0).r, 0.0);
        assert!(span_residual(&z, &i, 0.0).undefined_multiple);
        assert!((span_residual(&i, &(&i * 3.0), 0.0).lambda - 3.0).abs() < 1e-15);
    }

    #[test]
    fn formulations_agree_on_curved_metric() {
        let m = MetricField::perturbed_standard();
        let o = BourgainOptions { cross_check: true, ..Default::default() };
        let rep = bourgain_geodesic(&m, &[0.05, -0.03, 0.0], &[0.02, 0.04], 0.2, &o).unwrap();
        let Some(crate::conditions::Diagnostic::Number(d)) = rep.diagnostics.get("cross_check_discrepancy") else {
            panic!("no cross-check")
        };
        assert!(*d < 1e-3, "{d} {:?}", rep.residuals);
    }

    #[test]
    fn sphere_holds() {
        let m = MetricField::constant_curvature(3, 1.0).unwrap();
        let rep = bourgain_geodesic(&m, &[0.05, -0.03, 0.0], &[0.1, 0.04], 0.2, &Default::default()).unwrap();
        assert!(rep.residuals["r"] < 1e-6, "{:?}", rep.residuals);
    }
}
