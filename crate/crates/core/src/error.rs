use thiserror::Error;

/// Errors produced by layout geometry, simulation, consensus and evaluation.
#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    #[error("generation failure: {0}")]
    GenerationFailure(String),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LayoutError {
    /// Process exit code: 1 for I/O and other failures, 2 for empty input, 3 for bad configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            LayoutError::EmptyInput(_) => 2,
            LayoutError::Config { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = LayoutError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> LayoutError {
    LayoutError::InvalidArgument(msg.into())
}
