use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Violation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        })
    }
}

impl From<pharmonic::Error> for CliError {
    fn from(e: pharmonic::Error) -> Self {
        use pharmonic::Error as E;
        match e {
            E::NonFinite { .. } | E::Singular { .. } | E::Inconsistent(_) | E::NotConverged => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}
