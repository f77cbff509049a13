use fluxquant_core::Error as CoreError;

/// Failure of one command, classified by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => 2,
            Self::Io(_) => 3,
            Self::Numerical(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_) | CoreError::Parse { .. } => Self::Invalid(e.to_string()),
            CoreError::Io(_) => Self::Io(e.to_string()),
            CoreError::Accuracy { .. }
            | CoreError::SingularConfiguration(_)
            | CoreError::ContractViolation(_) => Self::Numerical(e.to_string()),
        }
    }
}
