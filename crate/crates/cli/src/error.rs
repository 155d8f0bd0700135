use thiserror::Error;

/// Failures mapped to process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input files: exit 2.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// The run itself failed: exit 3.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Contract and parse failures are the caller's fault; everything else
/// happened while running.
impl From<lagrangekit::Error> for CliError {
    fn from(e: lagrangekit::Error) -> Self {
        match e {
            lagrangekit::Error::Contract(_) | lagrangekit::Error::Parse(_) => CliError::Invalid(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
