pub mod conditions;
pub mod error;
pub mod geodesics;
pub mod jacobi;
pub mod jets;
pub mod linalg;
pub mod numerics;
pub mod osclab;
pub mod poly;
pub mod riemann;

pub use error::{Error, Result};
pub use jets::Jet;
pub use riemann::{MetricField, MetricSpec};
