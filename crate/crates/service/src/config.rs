use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;

use crate::error::ConfigError;

/// Runtime settings. Read from a TOML file, then overridden by
/// `HISTOSEG_HOST`, `HISTOSEG_PORT`, `HISTOSEG_MAX_UPLOAD_BYTES`,
/// `HISTOSEG_SESSION_TTL_SECS` and `HISTOSEG_PREVIEW_MAX_EDGE`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: IpAddr,
    pub port: u16,
    /// Largest accepted request body, in bytes.
    pub max_upload_bytes: usize,
    /// Sessions untouched for this long are dropped.
    pub session_ttl_secs: u64,
    pub sweep_interval_secs: u64,
    /// Longest edge of the preview PNGs embedded in JSON responses.
    pub preview_max_edge: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            max_upload_bytes: 64 * 1024 * 1024,
            session_ttl_secs: 30 * 60,
            sweep_interval_secs: 60,
            preview_max_edge: 1024,
        }
    }
}

fn parse_env<T: std::str::FromStr>(var: &str, raw: String) -> Result<T, ConfigError> {
    raw.trim().parse().map_err(|_| ConfigError::Env {
        var: var.to_string(),
        value: raw,
    })
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Loads `path` if given, then applies overrides looked up through `env`.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
                    path: p.display().to_string(),
                    source: e,
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        if let Some(v) = env("HISTOSEG_HOST") {
            cfg.host = parse_env("HISTOSEG_HOST", v)?;
        }
        if let Some(v) = env("HISTOSEG_PORT") {
            cfg.port = parse_env("HISTOSEG_PORT", v)?;
        }
        if let Some(v) = env("HISTOSEG_MAX_UPLOAD_BYTES") {
            cfg.max_upload_bytes = parse_env("HISTOSEG_MAX_UPLOAD_BYTES", v)?;
        }
        if let Some(v) = env("HISTOSEG_SESSION_TTL_SECS") {
            cfg.session_ttl_secs = parse_env("HISTOSEG_SESSION_TTL_SECS", v)?;
        }
        if let Some(v) = env("HISTOSEG_PREVIEW_MAX_EDGE") {
            cfg.preview_max_edge = parse_env("HISTOSEG_PREVIEW_MAX_EDGE", v)?;
        }
        Ok(cfg)
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.host, self.port)
    }

    pub fn session_ttl(&self) -> Duration {
        Duration::from_secs(self.session_ttl_secs)
    }

    pub fn sweep_interval(&self) -> Duration {
        Duration::from_secs(self.sweep_interval_secs.max(1))
    }
}
