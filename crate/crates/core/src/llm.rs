//! Chat-completion client used by the LLM architect and the intent parser.
//!
//! The HTTP side speaks the common `/chat/completions` JSON shape. Tests and
//! offline runs plug in [`ScriptedTransport`] or any other [`ChatTransport`].

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const DEFAULT_API_KEY_ENV: &str = "LEOREWARD_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmClientConfig {
    /// Full URL of the chat-completions endpoint. Empty means "not configured".
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_s: f64,
    pub temperature: f64,
    pub max_retries: u32,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        LlmClientConfig {
            endpoint: String::new(),
            model: "gpt-4o-mini".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_s: 30.0,
            temperature: 0.1,
            max_retries: 2,
        }
    }
}

impl LlmClientConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            errors.push("llm.timeout_s must be > 0".into());
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            errors.push("llm.temperature must be >= 0".into());
        }
    }

    pub fn is_configured(&self) -> bool {
        !self.endpoint.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("transport failure: {0}")]
    Http(String),
    #[error("unexpected response shape: {0}")]
    Malformed(String),
}

/// One request/response exchange with a chat model.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, TransportError>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    /// Builds a transport from `cfg`, reading the key from `cfg.api_key_env`.
    pub fn from_config(cfg: &LlmClientConfig) -> Result<Self> {
        if !cfg.is_configured() {
            return Err(Error::Llm("no endpoint configured".into()));
        }
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!("{} is not set; sending requests without a key", cfg.api_key_env);
        }
        Ok(Self::new(&cfg.endpoint, api_key, Duration::from_secs_f64(cfg.timeout_s)))
    }

    pub fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            agent,
            endpoint: endpoint.to_string(),
            api_key,
        }
    }
}

/// Pull `choices[0].message.content` out of a chat-completions response.
pub fn extract_content(body: &str) -> std::result::Result<String, TransportError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| TransportError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| TransportError::Malformed("missing choices[0].message.content".into()))
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, TransportError> {
        let body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
        })
        .to_string();
        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body.as_str()).map_err(|e| match e {
            ureq::Error::Timeout(t) => TransportError::Timeout(t.to_string()),
            other => TransportError::Http(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(t) => TransportError::Timeout(t.to_string()),
            other => TransportError::Http(other.to_string()),
        })?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Http(format!("status {status}: {text}")));
        }
        extract_content(&text)
    }
}

/// Replays canned responses in order and records the requests it saw.
/// When the script runs out it keeps returning the last response.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    responses: Mutex<VecDeque<std::result::Result<String, TransportError>>>,
    last: Mutex<Option<std::result::Result<String, TransportError>>>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedTransport {
    pub fn new(responses: Vec<std::result::Result<String, TransportError>>) -> Self {
        ScriptedTransport {
            responses: Mutex::new(responses.into()),
            last: Mutex::new(None),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().expect("lock").clone()
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, TransportError> {
        self.seen.lock().expect("lock").push(request.clone());
        let next = self.responses.lock().expect("lock").pop_front();
        let mut last = self.last.lock().expect("lock");
        match next {
            Some(r) => {
                *last = Some(r.clone());
                r
            }
            None => last
                .clone()
                .unwrap_or_else(|| Err(TransportError::Http("script exhausted".into()))),
        }
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, TransportError> {
        (**self).complete(request)
    }
}

/// Fill `{{name}}` placeholders in a prompt template.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}
