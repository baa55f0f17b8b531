use std::net::SocketAddr;

use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] blicket_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("LLM_API_KEY is not set")]
    MissingApiKey,
    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("endpoint returned an empty completion")]
    EmptyReply,
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// 2 for anything the user can fix in their configuration, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_)
            | HarnessError::MissingApiKey
            | HarnessError::Core(blicket_core::Error::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}
