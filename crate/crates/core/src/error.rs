use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported dimension {0}: {1}")]
    UnsupportedDimension(usize, &'static str),
    #[error("{what} needs jet order {needed}, have {}", have.map_or("exhausted".to_string(), |h| h.to_string()))]
    InsufficientOrder {
        what: &'static str,
        needed: usize,
        have: Option<usize>,
    },
    #[error("input to {what} is not symmetric (relative residual {residual:e})")]
    NotSymmetric { what: &'static str, residual: f64 },
    #[error("metric is not positive definite at {0:?}")]
    NotPositiveDefinite(Vec<f64>),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("point {point:?} lies outside the chart domain of {metric}")]
    OutsideDomain { metric: String, point: Vec<f64> },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
