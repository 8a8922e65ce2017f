use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum AbwError {
    /// Operands have incompatible dimensions or block shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument violates a precondition (non-finite entries, bad
    /// tolerance, non-orthogonal block, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A covariance matrix is indefinite beyond tolerance.
    #[error("not positive semi-definite: {0}")]
    NotPsd(String),

    /// A direction is not a tangent vector at the given base point.
    #[error("not a tangent vector: {0}")]
    NotTangent(String),

    /// An operation requires a regular factor.
    #[error("factor is not regular: {0}")]
    NotRegular(String),
}

pub type Result<T> = std::result::Result<T, AbwError>;
