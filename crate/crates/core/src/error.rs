use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("cannot initialise fit: {0}")]
    Initialization(String),

    /// The likelihood has no interior maximum for this data (e.g. no events).
    #[error("unidentifiable model: {0}")]
    Unidentifiable(String),

    /// The observed information matrix is not positive definite, so no
    /// standard errors exist at this point.
    #[error("information matrix is not positive definite")]
    SingularHessian,

    #[error("unknown optimizer `{name}` (available: {available})")]
    UnknownOptimizer { name: String, available: String },

    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: u64,
        field: String,
        message: String,
    },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("segmentation error: {0}")]
    Segmentation(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the data being statistically degenerate
    /// rather than malformed.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Unidentifiable(_) | Error::SingularHessian)
    }
}
