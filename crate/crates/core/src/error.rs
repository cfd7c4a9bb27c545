//! Crate-wide error type.

use core::fmt;

/// Errors raised by the statistical kernels and the detector.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A matrix expected to be positive definite failed factorization.
    NotPositiveDefinite { context: &'static str },
    /// A scalar argument fell outside the domain of a special function.
    DomainError { what: &'static str, value: f64 },
    /// Operand shapes are incompatible.
    DimensionMismatch { context: &'static str },
    /// Attempted to remove an observation from empty sufficient statistics.
    EmptyStats,
    /// Detector or guard configuration violates its invariants.
    InvalidConfig { what: &'static str },
    /// Every run-length hypothesis collapsed to zero mass; the input is
    /// corrupt (NaN or infinite values, typically).
    NumericalUnderflow,
    /// Outlier posterior requested with no shadow entries stored.
    EmptyBank,
    /// Regression design matrix is rank deficient.
    RankDeficient,
    /// Not enough observations to identify the regression.
    TooFewObservations { got: usize, need: usize },
    /// Fewer segment fits than hyperparameter estimation requires.
    TooFewSegments { got: usize },
    /// The degrees-of-freedom score has no root in the search interval.
    NoRoot,
    /// Segment coefficient estimates have no scatter; the coefficient prior
    /// precision is unidentifiable.
    SingularLambda,
    /// Scenario specification violates its invariants.
    InvalidSpec { what: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPositiveDefinite { context } => {
                write!(f, "matrix not positive definite ({context})")
            }
            Error::DomainError { what, value } => {
                write!(f, "argument out of domain: {what} = {value}")
            }
            Error::DimensionMismatch { context } => write!(f, "dimension mismatch ({context})"),
            Error::EmptyStats => write!(f, "cannot downdate empty sufficient statistics"),
            Error::InvalidConfig { what } => write!(f, "invalid configuration: {what}"),
            Error::NumericalUnderflow => {
                write!(f, "all run-length hypotheses underflowed; corrupt input?")
            }
            Error::EmptyBank => write!(f, "outlier posterior requested on an empty shadow bank"),
            Error::RankDeficient => write!(f, "design matrix is rank deficient"),
            Error::TooFewObservations { got, need } => {
                write!(f, "too few observations: got {got}, need at least {need}")
            }
            Error::TooFewSegments { got } => {
                write!(f, "need at least 2 segment fits, got {got}")
            }
            Error::NoRoot => write!(f, "degrees-of-freedom score has no root in search interval"),
            Error::SingularLambda => {
                write!(f, "segment coefficients identical; precision estimate singular")
            }
            Error::InvalidSpec { what } => write!(f, "invalid scenario spec: {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
