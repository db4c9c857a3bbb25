use thiserror::Error;

/// Errors produced by model construction, estimation, and data handling.
#[derive(Error, Debug)]
pub enum RfplsError {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Matrix or grid dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The requested number of components exceeds what the data supports.
    #[error("requested {requested} components but only {achievable} are achievable")]
    RankExceeded { requested: usize, achievable: usize },

    /// A linear system or decomposition failed numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An iterative routine ran out of iterations without meeting its tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// All residual columns had zero scale, so weights cannot be formed.
    #[error("residual scale is degenerate in every column; weights are undefined")]
    DegenerateScale,

    /// A file could not be read or written.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A CSV or JSON input could not be parsed.
    #[error("parse error in {path}{}: {message}", location.as_ref().map(|l| format!(" ({l})")).unwrap_or_default())]
    Parse {
        path: String,
        location: Option<String>,
        message: String,
    },
}

impl RfplsError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        RfplsError::InvalidArgument(msg.into())
    }

    pub fn dims(msg: impl Into<String>) -> Self {
        RfplsError::DimensionMismatch(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        RfplsError::Numerical(msg.into())
    }

    pub fn parse(path: impl Into<String>, location: Option<String>, msg: impl Into<String>) -> Self {
        RfplsError::Parse {
            path: path.into(),
            location,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, RfplsError>;
