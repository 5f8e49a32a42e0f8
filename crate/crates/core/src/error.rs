use thiserror::Error;

/// Every failure the laboratory can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {found} values but the grid has {expected} nodes")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field contains a non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("input must be mean-zero: mean {mean:e} exceeds tolerance {tolerance:e}")]
    NonZeroMean { mean: f64, tolerance: f64 },

    #[error("value {value} lies outside the domain of the singular potential")]
    DomainViolation { value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("value {value} violates the strict bound |s| < 1")]
    BoundViolation { value: f64 },

    #[error("mean target {0} is not in (-1, 1)")]
    MeanInfeasible(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("run stopped after step {step} by the step budget")]
    Interrupted { step: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable identifier used in machine-readable failure summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::GridMismatch => "GridMismatch",
            Error::NonFinite { .. } => "NonFinite",
            Error::NonZeroMean { .. } => "NonZeroMean",
            Error::DomainViolation { .. } => "DomainViolation",
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::NewtonDiverged { .. } => "NewtonDiverged",
            Error::BoundViolation { .. } => "BoundViolation",
            Error::MeanInfeasible(_) => "MeanInfeasible",
            Error::InsufficientData(_) => "InsufficientData",
            Error::Format(_) => "Format",
            Error::Config(_) => "Config",
            Error::Interrupted { .. } => "Interrupted",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
