//! Library side of the command-line laboratory: run configuration,
//! scenario implementations and the error-category mapping used for exit
//! codes.

pub mod config;
pub mod scenarios;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Constraint(String),
    #[error("{0}")]
    FitNonConvergence(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Constraint(_) => "constraint",
            CliError::FitNonConvergence(_) => "fit-non-convergence",
            CliError::Io(_) => "io",
            CliError::Other(_) => "other",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Constraint(_) => 3,
            CliError::FitNonConvergence(_) => 4,
            CliError::Io(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}
