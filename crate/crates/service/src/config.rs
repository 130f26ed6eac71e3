//! Service configuration: a TOML file, then environment overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_TOKEN_TTL: i64 = 30 * 24 * 3600;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config file: {0}")]
    Parse(String),
    #[error("invalid value for {var}: {value:?}")]
    Env { var: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    addr: Option<String>,
    archive: Option<PathBuf>,
    token_ttl: Option<i64>,
    admin_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    /// Socket address to bind.
    pub addr: String,
    /// Directory holding one sub-directory per study.
    pub archive: PathBuf,
    /// Token lifetime in seconds.
    pub token_ttl: i64,
    /// Bearer secret required to create studies. Unset means no check.
    pub admin_token: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            addr: DEFAULT_ADDR.into(),
            archive: PathBuf::from("maia-archive"),
            token_ttl: DEFAULT_TOKEN_TTL,
            admin_token: None,
        }
    }
}

impl ServiceConfig {
    pub fn with_archive(archive: impl Into<PathBuf>) -> Self {
        Self {
            archive: archive.into(),
            ..Self::default()
        }
    }

    /// Read `path` if given, then apply `MAIA_ADDR`, `MAIA_ARCHIVE`,
    /// `MAIA_TOKEN_TTL` and `MAIA_ADMIN_TOKEN`.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with(path, |k| std::env::var(k).ok())
    }

    pub fn load_with(
        path: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.display().to_string(),
                source,
            })?;
            let file: FileConfig =
                toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
            if let Some(v) = file.addr {
                cfg.addr = v;
            }
            if let Some(v) = file.archive {
                cfg.archive = v;
            }
            if let Some(v) = file.token_ttl {
                cfg.token_ttl = v;
            }
            cfg.admin_token = file.admin_token.or(cfg.admin_token);
        }
        if let Some(v) = env("MAIA_ADDR") {
            cfg.addr = v;
        }
        if let Some(v) = env("MAIA_ARCHIVE") {
            cfg.archive = v.into();
        }
        if let Some(v) = env("MAIA_TOKEN_TTL") {
            cfg.token_ttl = v
                .parse()
                .ok()
                .filter(|t: &i64| *t > 0)
                .ok_or(ConfigError::Env {
                    var: "MAIA_TOKEN_TTL",
                    value: v,
                })?;
        }
        if let Some(v) = env("MAIA_ADMIN_TOKEN") {
            cfg.admin_token = Some(v);
        }
        Ok(cfg)
    }
}
