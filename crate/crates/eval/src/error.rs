use earpipe_core::CoreError;
use earpipe_models::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fold holding out {patient}: {source}")]
    Fold {
        patient: String,
        #[source]
        source: Box<EvalError>,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<EvalError>,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl EvalError {
    pub fn config(msg: impl Into<String>) -> Self {
        EvalError::Config(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        EvalError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Machine-readable tag of the innermost error.
    pub fn kind(&self) -> &'static str {
        match self {
            EvalError::Core(e) => e.kind(),
            EvalError::Model(e) => e.kind(),
            EvalError::Config(_) => "config",
            EvalError::Fold { source, .. } | EvalError::Context { source, .. } => source.kind(),
            EvalError::Csv(_) => "csv",
            EvalError::Io(_) => "io",
            EvalError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, EvalError>;
