//! Chat-completion backends for the planner.
//!
//! [`HttpBackend`] talks to any OpenAI-compatible `/v1/chat/completions`
//! endpoint with inline base64 images. [`MockBackend`] answers in-process and
//! is a pure function of the request bytes, the seed and its script, so whole
//! pipeline runs replay bit-for-bit.

mod config;
mod http;
mod mock;

use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

pub use config::{BackendConfig, BackendKind, EndpointConfig, API_KEY_ENV, BASE_URL_ENV, MODEL_ENV};
pub use http::HttpBackend;
pub use mock::{mock_complete, MockBackend, MockMatch, MockRule, MockScript};

pub const DEFAULT_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_MAX_TOKENS: u32 = 512;

/// An image attached to a request, sent as a `data:` URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePayload {
    pub media_type: String,
    pub data: Vec<u8>,
}

impl ImagePayload {
    pub fn new(media_type: impl Into<String>, data: Vec<u8>) -> Self {
        ImagePayload {
            media_type: media_type.into(),
            data,
        }
    }

    /// Guesses the media type from a file extension, defaulting to PNG.
    pub fn from_file_bytes(path: &std::path::Path, data: Vec<u8>) -> Self {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        let media_type = match ext.as_str() {
            "jpg" | "jpeg" => "image/jpeg",
            "webp" => "image/webp",
            "gif" => "image/gif",
            _ => "image/png",
        };
        ImagePayload::new(media_type, data)
    }

    pub fn data_url(&self) -> String {
        format!(
            "data:{};base64,{}",
            self.media_type,
            base64::engine::general_purpose::STANDARD.encode(&self.data)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    pub system_text: Option<String>,
    pub user_text: String,
    pub images: Vec<ImagePayload>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl ModelRequest {
    pub fn new(user_text: impl Into<String>) -> Self {
        ModelRequest {
            system_text: None,
            user_text: user_text.into(),
            images: Vec::new(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: None,
        }
    }

    pub fn with_images(mut self, images: Vec<ImagePayload>) -> Self {
        self.images = images;
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        if self.user_text.trim().is_empty() {
            return Err(ClientError::InvalidRequest("user_text is empty".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ClientError::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(ClientError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    /// May be empty; downstream parsing treats that as a failed answer.
    pub text: String,
    /// Wall-clock seconds spent on the call, retries included.
    pub latency: f64,
    pub backend_id: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication rejected (HTTP {status}): {body}")]
    Authentication { status: u16, body: String },
    #[error("request rejected (HTTP {status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed response: {0}")]
    Schema(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid mock script: {0}")]
    Script(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

impl ClientError {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientError::Transport { .. } => "transport",
            ClientError::Authentication { .. } => "authentication",
            ClientError::Rejected { .. } => "rejected",
            ClientError::Schema(_) => "schema",
            ClientError::InvalidRequest(_) => "invalid_request",
            ClientError::Script(_) => "script",
            ClientError::Config(_) => "config",
        }
    }
}

/// Anything that can answer a chat request.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, ClientError>;

    fn backend_id(&self) -> &str;
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, ClientError> {
        (**self).complete(request)
    }

    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }
}

/// Builds the backend described by `config`.
pub fn connect(config: &BackendConfig) -> Result<Box<dyn ChatBackend>, ClientError> {
    match config {
        BackendConfig::Mock { script, delay } => {
            let script = match script {
                Some(path) => MockScript::load(path)?,
                None => MockScript::default(),
            };
            Ok(Box::new(MockBackend::new(script).with_delay(*delay)))
        }
        BackendConfig::Http(endpoint) => Ok(Box::new(HttpBackend::new(endpoint.clone())?)),
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}
