use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not a prime number")]
    NotPrime(u32),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("{0} has no inverse modulo {1}")]
    NoInverse(u32, u32),
    #[error("capacity exceeded: size {requested} is above the limit {limit}")]
    Capacity { requested: u128, limit: usize },
    #[error("no builtin fiducial for d = {0}; supply coefficients explicitly")]
    UnsupportedDimension(u32),
    #[error("fiducial matrix element vanishes at {0}; the dual kernel is undefined")]
    SingularFiducial(String),
    #[error("incomplete data: {0}")]
    IncompleteData(String),
    #[error("weight vector {0} is not realized in the measurement space")]
    EmptyClass(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
