use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("no soliton: {0}")]
    NoSoliton(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("missing dependency: {0}")]
    Dependency(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("singular operator: {0}")]
    Singular(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("decomposition failed: {0}")]
    Decomposition(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Singularity(_) => "singularity",
            Error::NoSoliton(_) => "no_soliton",
            Error::Numeric(_) => "numeric",
            Error::Argument(_) => "argument",
            Error::Dependency(_) => "dependency",
            Error::Precondition(_) => "precondition",
            Error::Grid(_) => "grid",
            Error::Singular(_) => "singular",
            Error::Undefined(_) => "undefined",
            Error::Decomposition(_) => "decomposition",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
