//! Metrics on chart boxes, the Levi-Civita connection and curvature.

mod curvature;
mod fermi;
mod metric;

pub use curvature::{christoffel, christoffel_jets, curvature, jet_matrix_inverse, Christoffel, CurvatureData};
pub use fermi::{fermi_derivative_table, validate_fermi, FermiTable};
pub use metric::{metric_library, Domain, MetricField, MetricJet, MetricSpec};
