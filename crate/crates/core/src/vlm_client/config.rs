use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use super::{ClientError, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};

pub const BASE_URL_ENV: &str = "INSTRUCTPLAN_BASE_URL";
pub const API_KEY_ENV: &str = "INSTRUCTPLAN_API_KEY";
pub const MODEL_ENV: &str = "INSTRUCTPLAN_MODEL";

const DEFAULT_BASE_URL: &str = "http://localhost:8000";
const DEFAULT_MODEL: &str = "llava-v1.6-mistral-7b";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone)]
pub enum BackendConfig {
    Mock {
        script: Option<PathBuf>,
        /// Artificial latency per call.
        delay: Duration,
    },
    Http(EndpointConfig),
}

impl BackendConfig {
    pub fn kind(&self) -> BackendKind {
        match self {
            BackendConfig::Mock { .. } => BackendKind::Mock,
            BackendConfig::Http(_) => BackendKind::Http,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    /// Extra attempts after the first one for transport errors and HTTP 5xx.
    pub max_retries: u32,
    /// First backoff; doubles on every retry.
    pub backoff: Duration,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: DEFAULT_BASE_URL.to_owned(),
            api_key: None,
            model: DEFAULT_MODEL.to_owned(),
            timeout: Duration::from_secs(300),
            max_retries: 3,
            backoff: Duration::from_secs(1),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// `[backend]` table of the TOML config file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    backend: FileBackend,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBackend {
    base_url: Option<String>,
    api_key: Option<String>,
    model: Option<String>,
    timeout_seconds: Option<f64>,
    max_retries: Option<u32>,
    backoff_seconds: Option<f64>,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
}

impl EndpointConfig {
    /// Layers settings: defaults, then the config file, then environment
    /// variables. Command-line overrides are applied by the caller afterwards.
    pub fn resolve(file: Option<&Path>) -> Result<Self, ClientError> {
        Self::resolve_with_env(file, |k| std::env::var(k).ok())
    }

    pub fn resolve_with_env(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ClientError> {
        let mut cfg = EndpointConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ClientError::Config(format!("{}: {e}", path.display())))?;
            let parsed: FileConfig = toml::from_str(&text)
                .map_err(|e| ClientError::Config(format!("{}: {e}", path.display())))?;
            let b = parsed.backend;
            if let Some(v) = b.base_url {
                cfg.base_url = v;
            }
            if b.api_key.is_some() {
                cfg.api_key = b.api_key;
            }
            if let Some(v) = b.model {
                cfg.model = v;
            }
            if let Some(v) = b.timeout_seconds {
                cfg.timeout = seconds(v, "timeout_seconds")?;
            }
            if let Some(v) = b.max_retries {
                cfg.max_retries = v;
            }
            if let Some(v) = b.backoff_seconds {
                cfg.backoff = seconds(v, "backoff_seconds")?;
            }
            if let Some(v) = b.temperature {
                cfg.temperature = v;
            }
            if let Some(v) = b.max_tokens {
                cfg.max_tokens = v;
            }
        }
        if let Some(v) = env(BASE_URL_ENV) {
            cfg.base_url = v;
        }
        if let Some(v) = env(API_KEY_ENV) {
            cfg.api_key = Some(v);
        }
        if let Some(v) = env(MODEL_ENV) {
            cfg.model = v;
        }
        Ok(cfg)
    }

    pub fn completions_url(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

fn seconds(v: f64, name: &str) -> Result<Duration, ClientError> {
    Duration::try_from_secs_f64(v).map_err(|e| ClientError::Config(format!("{name}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(
            &path,
            "[backend]\nbase_url = \"http://file:1\"\nmodel = \"m\"\nmax_retries = 1\n",
        )
        .unwrap();
        let cfg = EndpointConfig::resolve_with_env(Some(&path), |k| {
            (k == BASE_URL_ENV).then(|| "http://env:2/".to_owned())
        })
        .unwrap();
        assert_eq!(cfg.base_url, "http://env:2/");
        assert_eq!(cfg.model, "m");
        assert_eq!(cfg.max_retries, 1);
        assert_eq!(cfg.completions_url(), "http://env:2/v1/chat/completions");
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "[backend]\nbase_ur = \"x\"\n").unwrap();
        assert!(EndpointConfig::resolve_with_env(Some(&path), |_| None).is_err());
    }
}
