use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("cone dimensions sum to {cones} but the constraint matrix has {rows} rows")]
    ConeRowMismatch { cones: usize, rows: usize },
    #[error("invalid cone block: {0}")]
    InvalidCone(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in problem data ({0})")]
    NonFinite(&'static str),
    #[error("linear system factorization failed")]
    Factorization,
}

pub type Result<T> = std::result::Result<T, ConicError>;
