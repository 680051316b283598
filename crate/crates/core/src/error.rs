use thiserror::Error;

use crate::labelspace::LabelSet;
use crate::lmo::ValidationReport;

/// Errors raised by density construction and the numerical operations on them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("weights sum to {total}, expected 1 within {tolerance:e}")]
    Unnormalized { total: f64, tolerance: f64 },

    #[error("covariance is not symmetric (max asymmetry {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },

    #[error("covariance is not positive definite (eigenvalues {eigenvalues:?})")]
    NotPositiveDefinite { eigenvalues: Vec<f64> },

    #[error("invalid density:\n{0}")]
    Invalid(ValidationReport),

    #[error("stratum {stratum} needs a {dim}-dimensional integral; grid quadrature is limited to {max} dimensions and Monte Carlo is disabled")]
    Refused {
        stratum: LabelSet,
        dim: usize,
        max: usize,
    },

    #[error("grid quadrature supports at most {max} dimensions, got {dim}")]
    GridDimension { dim: usize, max: usize },

    #[error("the two densities have no common support")]
    DisjointSupport,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
