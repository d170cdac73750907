use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The operator violates a spectral requirement (e.g. positive spectrum).
    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    /// A parameter gate of the field constructions is violated.
    #[error("parameter condition violated: {0}")]
    ParameterCondition(String),

    /// A statistical test was requested outside the hypotheses that make it meaningful.
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("resolution too coarse: {0}")]
    Resolution(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
