use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{context}: matrix is not symmetric positive definite")]
    NotPositiveDefinite { context: String },

    #[error("end-effector inside obstacle safety radius (penetration {penetration:.6} m)")]
    DomainViolation { penetration: f64 },

    #[error("trace is empty")]
    EmptyTrace,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
