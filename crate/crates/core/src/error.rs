use thiserror::Error;

/// Errors raised by the signal, conditioning and decomposition layers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        CoreError::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        CoreError::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            CoreError::InvalidParameter(_) => "invalid_parameter",
            CoreError::LengthMismatch(_) => "length_mismatch",
            CoreError::ShapeMismatch(_) => "shape_mismatch",
            CoreError::Degenerate(_) => "degenerate_input",
            CoreError::Parse { .. } => "parse",
            CoreError::Io(_) => "io",
            CoreError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
