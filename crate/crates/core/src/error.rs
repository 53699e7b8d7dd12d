//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric: max asymmetry {max_asymmetry:.3e} exceeds tolerance")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("matrix is not positive semi-definite: eigenvalue {min_eigenvalue:.3e} below -1e-10")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unsupported distribution family: {0}")]
    UnsupportedFamily(String),

    #[error("incompatible distributions: {0}")]
    Incompatible(String),

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("model format error: {0}")]
    ModelFormat(String),
}
