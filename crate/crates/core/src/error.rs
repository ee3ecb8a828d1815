use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graphon: {0}")]
    InvalidGraphon(String),

    #[error("coordinate out of range: ({x}, {y}) not in [0,1]^2")]
    OutOfRange { x: f64, y: f64 },

    #[error("invalid scheme configuration: {0}")]
    InvalidScheme(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("graph has no latent positions; {0} requires latents")]
    MissingLatents(&'static str),

    #[error("non-finite objective after {backtracks} backtracking steps")]
    NonFinite { backtracks: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("manifest validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
