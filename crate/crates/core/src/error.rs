use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants are grouped so that front ends can map them onto exit codes:
/// configuration-like problems, capacity limits, and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (dimension mismatch, wrong grid, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A parameter lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The two inputs live in different bases.
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    /// The requested operation is not supported for this basis or observable.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Problem size exceeds a configured guard.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Invalid experiment or sampler configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Krylov propagation failed to meet its tolerance.
    #[error("propagation error: {0}")]
    Propagation(String),

    /// Every DMQMC loop ended with a vanishing diagonal population.
    #[error("sampling failure: {0}")]
    Sampling(String),

    /// A normalization constant vanished.
    #[error("undefined normalization: {0}")]
    UndefinedNormalization(String),

    /// Truncation left a matrix with (near) zero trace.
    #[error("degenerate truncation: {0}")]
    DegenerateTruncation(String),

    /// A consistency check on computed results failed.
    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_)
            | Error::Domain(_)
            | Error::BasisMismatch(_)
            | Error::Unsupported(_)
            | Error::Config(_) => 2,
            Error::Capacity(_) => 3,
            Error::Propagation(_)
            | Error::Sampling(_)
            | Error::UndefinedNormalization(_)
            | Error::DegenerateTruncation(_)
            | Error::Internal(_)
            | Error::Eigen(_) => 4,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
