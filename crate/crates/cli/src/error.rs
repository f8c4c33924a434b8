use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("particle weights degenerated at step {step}; raise sigma_D or N")]
    Degenerate { step: usize },
    #[error("{0}")]
    Io(String),
    #[error("bad input data: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Degenerate { .. } => 3,
            CliError::Io(_) | CliError::Data(_) => 1,
        }
    }
}

impl From<tvpf_core::Error> for CliError {
    fn from(e: tvpf_core::Error) -> Self {
        match e {
            tvpf_core::Error::DegenerateWeights { step } => CliError::Degenerate { step },
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
