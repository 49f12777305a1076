use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("shooting left the feasible range: {0}")]
    InfeasibleShoot(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("non-finite reward {0}")]
    NonFiniteReward(f64),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Domain(_) => "domain",
            Error::Validation(_) => "validation",
            Error::Usage(_) => "usage",
            Error::Estimation(_) => "estimation",
            Error::Training(_) => "training",
            Error::InfeasibleShoot(_) => "infeasible-shoot",
            Error::Convergence(_) => "convergence",
            Error::NonFiniteReward(_) => "non-finite-reward",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
