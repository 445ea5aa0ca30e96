use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("jet shape mismatch: ({0}, {1}) vs ({2}, {3})")]
    JetShape(usize, usize, usize, usize),
    #[error("index {index} out of range for {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("order {got} exceeds the supported maximum {max}")]
    Order { got: usize, max: usize },
    #[error("{0}")]
    Domain(String),
    #[error("point {0:?} leaves the chart domain")]
    DomainExit(Vec<f64>),
    #[error("matrix is numerically singular ({0})")]
    Singular(String),
    #[error("{what} did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence { what: String, iters: usize, residual: f64 },
    #[error("ill-conditioned {what}: condition number {cond:e}")]
    IllConditioned { what: String, cond: f64 },
    #[error("resolution guard exceeded: {0}")]
    Resolution(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
