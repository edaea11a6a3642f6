use serde::Deserialize;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::error::{ServiceError, ServiceResult};
use crate::wire::DEFAULT_MAX_FRAME;

/// Overrides `snapshot_path` from the config file.
pub const SNAPSHOT_ENV: &str = "CSSE_SNAPSHOT";

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    pub snapshot_path: Option<PathBuf>,
    pub max_frame_bytes: u64,
    pub session_timeout_secs: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 7878)),
            snapshot_path: None,
            max_frame_bytes: DEFAULT_MAX_FRAME,
            session_timeout_secs: 300,
        }
    }
}

impl ServerConfig {
    pub fn from_toml(s: &str) -> ServiceResult<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` if given, then applies the environment override.
    pub fn load(path: Option<&Path>) -> ServiceResult<Self> {
        let mut cfg = match path {
            Some(p) => {
                let s = std::fs::read_to_string(p)
                    .map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml(&s)?
            }
            None => Self::default(),
        };
        cfg.apply_env(std::env::var_os(SNAPSHOT_ENV).map(PathBuf::from));
        Ok(cfg)
    }

    pub fn apply_env(&mut self, snapshot: Option<PathBuf>) {
        if let Some(p) = snapshot.filter(|p| !p.as_os_str().is_empty()) {
            self.snapshot_path = Some(p);
        }
    }

    pub fn session_timeout(&self) -> Duration {
        Duration::from_secs(self.session_timeout_secs)
    }

    fn validate(&self) -> ServiceResult<()> {
        if self.max_frame_bytes < 1024 || self.max_frame_bytes > u64::from(u32::MAX) {
            return Err(ServiceError::Config(format!(
                "max_frame_bytes must be in [1024, {}]",
                u32::MAX
            )));
        }
        if self.session_timeout_secs == 0 {
            return Err(ServiceError::Config("session_timeout_secs must be positive".into()));
        }
        Ok(())
    }
}
