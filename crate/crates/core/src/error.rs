use thiserror::Error;

/// Errors produced anywhere in the design / estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("matrix is not positive definite (smallest eigenvalue {lambda_min:e}, largest {lambda_max:e})")]
    Singular { lambda_min: f64, lambda_max: f64 },

    #[error("rank error: requested {requested} directions but only {available} are numerically positive")]
    Rank { requested: usize, available: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("scenario parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("design infeasible for strategy {strategy}: {reason}")]
    DesignInfeasible { strategy: String, reason: String },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("parameters not identifiable: {0}")]
    Identifiability(String),

    #[error("round {round}: {source}")]
    Round { round: usize, source: Box<Error> },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
