use std::process::ExitCode;

use gridform_core::simulator::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read input: {0}")]
    Input(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {}", .0.join("; "))]
    Schema(Vec<String>),
    #[error("validation error: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) | CliError::Parse(_) | CliError::Schema(_) | CliError::Validation(_) => {
                ExitCode::from(2)
            }
            CliError::Runtime(_) => ExitCode::from(3),
            CliError::Output(_) => ExitCode::from(1),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(vec![msg.into()])
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidScenario(errs) => CliError::Validation(errs),
            e if e.is_runtime() => CliError::Runtime(e.to_string()),
            // inconsistent initial states and similar input problems
            SimError::Controller { .. } | SimError::Network(_) => CliError::Validation(vec![e.to_string()]),
            e => CliError::Runtime(e.to_string()),
        }
    }
}
