//! Fixtures shared by the kernel benchmarks.

use oscgeo::conditions::PhaseField;
use oscgeo::MetricField;

/// Metrics with curvature that varies from point to point.
pub fn curved_metrics() -> Vec<(&'static str, MetricField)> {
    vec![("appendix_bourgain", MetricField::appendix_bourgain()), ("perturbed", MetricField::perturbed_standard())]
}

pub fn paraboloid() -> PhaseField {
    PhaseField::named("paraboloid").expect("library phase")
}
