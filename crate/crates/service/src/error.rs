use thiserror::Error;

use crate::wire::ErrorCode;

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad frame: {0}")]
    Frame(String),

    #[error("frame of {len} bytes exceeds the {cap}-byte cap")]
    Oversized { len: u64, cap: u64 },

    #[error("server replied {code:?}: {message}")]
    Remote { code: ErrorCode, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Core(#[from] csse_core::Error),
}

impl From<ServiceError> for csse_core::Error {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Core(e) => e,
            ServiceError::Remote { code, message } if code != ErrorCode::Malformed => {
                csse_core::Error::Protocol(format!("{code:?}: {message}"))
            }
            other => csse_core::Error::Transport(other.to_string()),
        }
    }
}
