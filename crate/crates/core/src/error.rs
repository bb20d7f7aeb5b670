use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("kernel terms are not supported here: {0}")]
    KernelTermsPresent(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("solver status {0} cannot be decoded into a solution")]
    NotDecodable(String),

    #[error("decoded objective {decoded} disagrees with solver objective {solver}")]
    ObjectiveMismatch { decoded: f64, solver: f64 },

    #[error("solver backend error: {0}")]
    Backend(String),

    #[error("SDPA format error on line {line}: {message}")]
    Sdpa { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
