use thiserror::Error;

/// Errors raised by the geometry kernel, the projection selectors and the
/// iterative solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate in input point")]
    NonFinite,

    #[error("points are distinct and colinear; circumcenter does not exist")]
    DistinctColinearInput,

    #[error("search window does not meet the graph domain")]
    EmptyDomain,

    #[error("abscissa {t} lies outside the graph domain")]
    OutsideDomain { t: f64 },

    #[error("derivative vanishes at t = {t}")]
    DerivativeZero { t: f64 },

    #[error("derivative undefined at t = {t}")]
    DerivativeUndefined { t: f64 },

    #[error("subgradient has zero norm")]
    ZeroSubgradient,

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("trace too short: {len} iterates, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported geometry: {0}")]
    Unsupported(String),

    #[error("problem definition: {0}")]
    Definition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
