use thiserror::Error;

pub type Result<T, E = AoiError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AoiError {
    #[error("{field} must be a positive rate, got {value}")]
    NonPositiveRate { field: String, value: f64 },

    #[error("{field} must be finite, got {value}")]
    NonFiniteRate { field: String, value: f64 },

    #[error("at least one source is required")]
    EmptySourceList,

    #[error("source index {index} out of range 1..={sources}")]
    IndexOutOfRange { index: usize, sources: usize },

    #[error("transform argument must be nonnegative, got {0}")]
    NegativeTransformArgument(f64),

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("operation requires exactly two sources, model has {0}")]
    RequiresTwoSources(usize),

    #[error("measurement window is empty")]
    EmptyWindow,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("need at least {needed} replications, got {got}")]
    InsufficientReplications { needed: usize, got: usize },

    #[error("horizon too small: {0}")]
    HorizonTooSmall(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for AoiError {
    fn from(e: std::io::Error) -> Self {
        AoiError::Io(e.to_string())
    }
}

impl From<csv::Error> for AoiError {
    fn from(e: csv::Error) -> Self {
        AoiError::Io(e.to_string())
    }
}

impl AoiError {
    /// Variant name, for terse diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            AoiError::NonPositiveRate { .. } => "NonPositiveRate",
            AoiError::NonFiniteRate { .. } => "NonFiniteRate",
            AoiError::EmptySourceList => "EmptySourceList",
            AoiError::IndexOutOfRange { .. } => "IndexOutOfRange",
            AoiError::NegativeTransformArgument(_) => "NegativeTransformArgument",
            AoiError::NegativeTime(_) => "NegativeTime",
            AoiError::RequiresTwoSources(_) => "RequiresTwoSources",
            AoiError::EmptyWindow => "EmptyWindow",
            AoiError::InsufficientSamples { .. } => "InsufficientSamples",
            AoiError::InsufficientReplications { .. } => "InsufficientReplications",
            AoiError::HorizonTooSmall(_) => "HorizonTooSmall",
            AoiError::InvalidConfig(_) => "InvalidConfig",
            AoiError::Io(_) => "Io",
        }
    }
}
