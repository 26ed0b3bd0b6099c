use gbmsum::Error;
use thiserror::Error as ThisError;

#[derive(ThisError, Debug)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    /// An accuracy warning escalated by `--strict`.
    #[error("accuracy check failed: {0}")]
    Accuracy(String),
    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 2 infeasible or invalid parameters, 3 non-convergence, 4 accuracy, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                Error::NonConvergence { .. } => 3,
                Error::GridTooCoarse { .. } | Error::Overflow(_) => 4,
                Error::Domain(_)
                | Error::Infeasible(_)
                | Error::DivergentExpectation { .. }
                | Error::MomentDoesNotExist(_)
                | Error::NoRoot(_)
                | Error::Config(_) => 2,
            },
            CliError::Accuracy(_) => 4,
            CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}
