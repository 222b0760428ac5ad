//! CLI error taxonomy mapped to process exit codes:
//! 0 success, 2 validation, 3 numerical failure, 4 verification failure.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(hesea_core::Error),

    #[error("verification failed: {failed} of {total} checks out of tolerance")]
    VerificationFailed { failed: usize, total: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation { .. } | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::VerificationFailed { .. } => 4,
        }
    }

    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<hesea_core::Error> for CliError {
    fn from(e: hesea_core::Error) -> Self {
        // construction-time errors are the user's input; runtime solver and
        // stepper failures are numerical
        use hesea_core::Error::*;
        match e {
            NoConvergence { .. } | StepSizeUnderflow { .. } | DegenerateVariance { .. }
            | ZeroPopulationTotal => CliError::Numerical(e),
            other => CliError::validation("scenario", other.to_string()),
        }
    }
}
