use std::path::PathBuf;

use oblique::fd::FdError;
use oblique::oracle::OracleError;
use oblique::picard::PicardError;
use oblique::{ProblemError, ValidationError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("problem file: {0}")]
    Problem(#[from] ProblemError),
    #[error("validation: {0}")]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Fd(#[from] FdError),
    #[error(transparent)]
    Picard(#[from] PicardError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("thread pool: {0}")]
    Threads(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Stable machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Problem(ProblemError::Syntax { .. } | ProblemError::Expression { .. }) => "problem_syntax",
            CliError::Problem(_) => "problem_invalid",
            CliError::Validation(ValidationError::TooManyModes(_)) => "too_many_modes",
            CliError::Validation(ValidationError::Eval { .. }) => "evaluation",
            CliError::Fd(e) => e.code(),
            CliError::Picard(e) => e.code(),
            CliError::Oracle(e) => e.code(),
            CliError::Threads(_) => "threads",
        }
    }

    /// `error[<code>]: <text>` on a single line.
    pub fn line(&self) -> String {
        let text = self.to_string().replace('\n', "; ");
        format!("error[{}]: {text}", self.code())
    }
}
