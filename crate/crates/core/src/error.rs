use thiserror::Error;

/// Errors raised by group models, solvers and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown generator {0:?}")]
    UnknownGenerator(String),

    #[error("invalid group model: {0}")]
    InvalidModel(String),

    #[error("invalid step law: {0}")]
    InvalidLaw(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unverified-geodesic-length: word of length {length} lies beyond the verified radius {radius}")]
    UnverifiedGeodesic { length: usize, radius: u32 },

    #[error("budget exceeded: ball needs an estimated {required} elements, budget is {budget}")]
    BudgetExceeded { required: u64, budget: u64 },

    #[error("operation requires a tree model: {0}")]
    NotTreeModel(String),

    #[error("mixed estimation methods: {0}")]
    MixedMethods(String),

    #[error("boundary point too shallow: depth {required} needed")]
    InsufficientDepth { required: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("estimate refused: {0}")]
    Refused(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
