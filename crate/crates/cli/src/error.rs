use mdl_core::MdlError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration cannot be executed; exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// Execution failed; exit code 1.
    #[error(transparent)]
    Run(#[from] MdlError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Some trials failed; their outputs are missing from the results.
    #[error("{failed} of {total} trials failed")]
    TrialsFailed { failed: usize, total: usize },
}

impl CliError {
    /// Classifies an error raised while resolving a configuration: parameter
    /// problems are configuration errors, anything else is a run failure.
    pub fn from_setup(e: MdlError) -> Self {
        match e {
            MdlError::Validation(m) | MdlError::Configuration(m) | MdlError::Domain(m) => CliError::Config(m),
            other => CliError::Run(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
