use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

/// Maps onto the process exit codes: 1 for user errors, 2 for protocol and
/// transport failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),

    #[error("{0}")]
    Protocol(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Protocol(_) => 2,
        }
    }

    pub fn user(msg: impl Into<String>) -> Self {
        CliError::User(msg.into())
    }
}

impl From<csse_core::Error> for CliError {
    fn from(e: csse_core::Error) -> Self {
        use csse_core::Error::*;
        match e {
            InvalidParameter(_) | CapacityExceeded { .. } | CounterOverflow => CliError::User(e.to_string()),
            _ => CliError::Protocol(e.to_string()),
        }
    }
}

impl From<csse_service::ServiceError> for CliError {
    fn from(e: csse_service::ServiceError) -> Self {
        use csse_service::ServiceError::*;
        match e {
            Config(_) => CliError::User(e.to_string()),
            Core(inner) => inner.into(),
            _ => CliError::Protocol(e.to_string()),
        }
    }
}
