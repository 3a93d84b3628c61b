use thiserror::Error;

/// Error type shared by all analysis modules.
#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("zero vector: norm {norm:e} is below the representability threshold")]
    ZeroVector { norm: f64 },

    #[error("singular generator at orbit step {step}: log|det| = {log_det}")]
    SingularGenerator { step: i64, log_det: f64 },

    #[error("non-positive value in series at index {index}")]
    NonPositiveValue { index: usize },

    #[error("degenerate splitting: {reason}")]
    DegenerateSplitting { reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty fiber: subspace family `{label}` has dimension 0")]
    EmptyFiber { label: String },

    #[error("unknown scenario `{name}`")]
    UnknownScenario { name: String },

    #[error("invalid parameters: {reason}")]
    InvalidParams { reason: String },

    #[error("matrix reconstitution would overflow (log-scale {log_scale})")]
    NumericOverflow { log_scale: f64 },

    #[error("config error: {reason}")]
    ConfigError { reason: String },

    #[error("scenario error: {reason}")]
    ScenarioError { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SpectraError>;

impl SpectraError {
    pub fn invalid(reason: impl Into<String>) -> Self {
        SpectraError::InvalidParams { reason: reason.into() }
    }

    pub fn degenerate(reason: impl Into<String>) -> Self {
        SpectraError::DegenerateSplitting { reason: reason.into() }
    }

    pub fn config(reason: impl Into<String>) -> Self {
        SpectraError::ConfigError { reason: reason.into() }
    }
}
