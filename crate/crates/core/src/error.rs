use std::path::PathBuf;

/// Errors raised anywhere in the library.
///
/// Every variant maps to a stable token through [`Error::code`]; the CLI
/// prints that token so scripts can match on failures without parsing prose.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("degenerate model: innovation variance {variance:e} at time {time}")]
    DegenerateInnovation { time: usize, variance: f64 },

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("nonstationary AR coefficients (spectral radius {radius:.6})")]
    Nonstationary { radius: f64 },

    #[error("partial autocorrelation {index} = {value} outside (-1, 1)")]
    InvalidPartialAutocorrelation { index: usize, value: f64 },

    #[error("prediction horizon must be at least 1")]
    InvalidHorizon,

    #[error("insufficient data: need more than {needed} observations, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("degenerate zero-variance prediction errors")]
    ZeroVariance,

    #[error("optimizer: {0}")]
    Optimizer(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },
}

impl Error {
    /// Stable machine-readable token for this error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "E_DIMENSION",
            Error::NotPositiveDefinite { .. } => "E_NOT_SPD",
            Error::NonFinite(_) => "E_NON_FINITE",
            Error::DegenerateInnovation { .. } => "E_DEGENERATE_MODEL",
            Error::InvalidSpec(_) => "E_INVALID_SPEC",
            Error::Nonstationary { .. } => "E_NONSTATIONARY",
            Error::InvalidPartialAutocorrelation { .. } => "E_INVALID_PAC",
            Error::InvalidHorizon => "E_INVALID_HORIZON",
            Error::InsufficientData { .. } => "E_INSUFFICIENT_DATA",
            Error::ZeroVariance => "E_ZERO_VARIANCE",
            Error::Optimizer(_) => "E_OPTIMIZER",
            Error::Io { .. } => "E_IO",
            Error::Parse { .. } => "E_PARSE",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
