use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("training data needs both classes: {0}")]
    SingleClass(String),

    #[error("malformed model file at {location}: {message}")]
    Format { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ModelError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        ModelError::InvalidParameter(msg.into())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::InvalidParameter(_) => "invalid_parameter",
            ModelError::Dimension { .. } => "dimension_mismatch",
            ModelError::SingleClass(_) => "single_class",
            ModelError::Format { .. } => "format",
            ModelError::Io(_) => "io",
            ModelError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Checks that every row has `dim` columns and the label count matches.
pub(crate) fn check_dataset(x: &[Vec<f64>], n_labels: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(ModelError::param("empty training set"));
    }
    if x.len() != n_labels {
        return Err(ModelError::Dimension {
            expected: x.len(),
            got: n_labels,
        });
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(ModelError::Dimension {
                expected: d,
                got: row.len(),
            });
        }
    }
    Ok(d)
}
