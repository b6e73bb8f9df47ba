use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("degenerate triangle {0} (zero or negative area)")]
    DegenerateTriangle(usize),

    #[error("non-finite value encountered while evaluating {0}")]
    NonFinite(&'static str),

    #[error("{method} did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{method} breakdown: {reason}")]
    Breakdown { method: &'static str, reason: String },

    #[error("singular rank-one correction (denominator {0:.3e})")]
    SingularCorrection(f64),

    #[error("singular matrix in dense LU (pivot column {0})")]
    SingularMatrix(usize),

    #[error("history cache holds levels up to {available}, level {requested} requested")]
    CacheUnderflow { requested: usize, available: usize },

    #[error("time step {level} failed: {source}")]
    Step {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
