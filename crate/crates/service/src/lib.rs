//! Deployment shell around the csse server engine: a framed binary protocol
//! over TCP, a multi-session daemon that pins each search to one database
//! snapshot, atomic on-disk snapshots, and a client adapter that drives the
//! search protocol remotely.

pub mod config;
pub mod daemon;
mod error;
pub mod persist;
pub mod remote;
pub mod wire;

pub use config::ServerConfig;
pub use daemon::{spawn, ServerHandle, Shared};
pub use error::{ServiceError, ServiceResult};
pub use remote::{client_connect, read_keyfile, write_keyfile, RemoteChannel, RemoteClient, Stats};
