use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("deep bounds unavailable for this activation: {0}")]
    DeepBoundsUnavailable(String),

    #[error("degenerate variance: {0}")]
    Degenerate(String),

    #[error("quadrature did not converge after {nodes} nodes (last relative change {change:e})")]
    Quadrature { nodes: usize, change: f64 },

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DeepBoundsUnavailable(_) => "deep_bounds_unavailable",
            Error::Degenerate(_) => "degenerate",
            Error::Quadrature { .. } => "quadrature",
            Error::ResourceGuard(_) => "resource_guard",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
