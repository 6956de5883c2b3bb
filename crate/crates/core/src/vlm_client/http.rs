use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{secs, ChatBackend, ClientError, EndpointConfig, ModelRequest, ModelResponse};

/// Blocking client for OpenAI-compatible chat-completions servers.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    config: EndpointConfig,
    client: Client,
    id: String,
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<Value>,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(ClientError),
}

impl HttpBackend {
    pub fn new(config: EndpointConfig) -> Result<Self, ClientError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        let id = format!("http:{}", config.model);
        Ok(HttpBackend { config, client, id })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// The JSON body sent for `request`. Prompt text and image bytes are
    /// passed through unchanged.
    pub fn request_body(&self, request: &ModelRequest) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &request.system_text {
            messages.push(json!({"role": "system", "content": system}));
        }
        let mut content = vec![json!({"type": "text", "text": request.user_text})];
        for image in &request.images {
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": image.data_url()},
            }));
        }
        messages.push(json!({"role": "user", "content": content}));

        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let mut req = self.client.post(self.config.completions_url()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        if status.is_server_error() {
            return Attempt::Retry(format!("HTTP {}: {}", status.as_u16(), truncate(&text)));
        }
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Attempt::Fatal(ClientError::Authentication {
                status: status.as_u16(),
                body: truncate(&text),
            });
        }
        if !status.is_success() {
            return Attempt::Fatal(ClientError::Rejected {
                status: status.as_u16(),
                body: truncate(&text),
            });
        }
        match extract_content(&text) {
            Ok(content) => Attempt::Done(content),
            Err(e) => Attempt::Fatal(e),
        }
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(300).collect()
}

/// Text of the first choice. String content and arrays of text parts are both
/// accepted; a null content is an empty answer.
fn extract_content(body: &str) -> Result<String, ClientError> {
    let parsed: CompletionBody =
        serde_json::from_str(body).map_err(|e| ClientError::Schema(e.to_string()))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ClientError::Schema("response has no choices".into()))?;
    match choice.message.content {
        None | Some(Value::Null) => Ok(String::new()),
        Some(Value::String(s)) => Ok(s),
        Some(Value::Array(parts)) => Ok(parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join("")),
        Some(other) => Err(ClientError::Schema(format!(
            "unexpected message content {other}"
        ))),
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, ClientError> {
        request.validate()?;
        let body = self.request_body(request);
        let started = Instant::now();
        let mut backoff = self.config.backoff;
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(&body) {
                Attempt::Done(text) => {
                    return Ok(ModelResponse {
                        text,
                        latency: secs(started.elapsed()),
                        backend_id: self.id.clone(),
                    });
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(reason) => {
                    tracing::warn!(attempt, %reason, "chat completion failed");
                    last = reason;
                    if attempt < attempts {
                        thread::sleep(backoff);
                        backoff = backoff.saturating_mul(2).min(Duration::from_secs(60));
                    }
                }
            }
        }
        Err(ClientError::Transport {
            attempts,
            message: last,
        })
    }

    fn backend_id(&self) -> &str {
        &self.id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_shapes() {
        let s = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(extract_content(s).unwrap(), "hi");
        let a = r#"{"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]}"#;
        assert_eq!(extract_content(a).unwrap(), "ab");
        let n = r#"{"choices":[{"message":{"content":null}}]}"#;
        assert_eq!(extract_content(n).unwrap(), "");
        assert!(matches!(
            extract_content(r#"{"choices":[]}"#),
            Err(ClientError::Schema(_))
        ));
        assert!(matches!(extract_content("nope"), Err(ClientError::Schema(_))));
    }

    #[test]
    fn body_carries_prompt_bytes_and_images() {
        let backend = HttpBackend::new(EndpointConfig::default()).unwrap();
        let req = ModelRequest::new("Task: x.\nquote \" and unicode \u{2019}")
            .with_images(vec![super::super::ImagePayload::new("image/png", vec![1, 2, 3])])
            .with_seed(Some(9));
        let body = backend.request_body(&req);
        assert_eq!(body["messages"][0]["content"][0]["text"], req.user_text.as_str());
        assert_eq!(
            body["messages"][0]["content"][1]["image_url"]["url"],
            "data:image/png;base64,AQID"
        );
        assert_eq!(body["seed"], 9);
        assert_eq!(body["temperature"], 0.2);
    }
}
