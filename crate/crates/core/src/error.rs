use thiserror::Error;

use crate::specfun::SpecFunError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("invalid shape parameters: {0}")]
    InvalidShape(String),
    #[error("shape `{0}` is not starlike about the origin")]
    NotStarlike(String),
    #[error("operator {kind} is not supported on {shape}")]
    Unsupported { kind: String, shape: String },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("matrix is exactly singular")]
    Singular,
    #[error("singular value computation failed: {0}")]
    Svd(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("root bracket not found: {0}")]
    Bracket(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
