//! OpenAI-compatible chat-completions backend.

use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as BASE64_STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{BackendFailure, BackendReply, VlmBackend, VlmRequest};
use super::GatewayError;

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const API_KEY_ENV: &str = "VLM_API_KEY";
pub const ENDPOINT_ENV: &str = "VLM_ENDPOINT";
pub const MODEL_ENV: &str = "VLM_MODEL";

/// Live endpoint settings. The API key is never serialized.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub max_tokens: Option<u32>,
    pub timeout_secs: Option<u64>,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl LiveConfig {
    /// Fills unset fields from `VLM_ENDPOINT`, `VLM_MODEL`, and `VLM_API_KEY`.
    pub fn with_env(mut self) -> Self {
        let env = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        self.endpoint = self.endpoint.or_else(|| env(ENDPOINT_ENV));
        self.model = self.model.or_else(|| env(MODEL_ENV));
        self.api_key = self.api_key.or_else(|| env(API_KEY_ENV));
        self
    }
}

pub struct LiveBackend {
    endpoint: String,
    model: String,
    api_key: String,
    max_tokens: u32,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveBackend")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl LiveBackend {
    pub fn new(cfg: &LiveConfig) -> Result<Self, GatewayError> {
        let api_key = cfg
            .api_key
            .clone()
            .ok_or_else(|| GatewayError::ConfigMissing(format!("no API key; set {API_KEY_ENV}")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs.unwrap_or(120)))
            .build()
            .map_err(|e| GatewayError::ConfigMissing(format!("HTTP client: {e}")))?;
        Ok(Self {
            endpoint: cfg.endpoint.clone().unwrap_or_else(|| DEFAULT_ENDPOINT.into()),
            model: cfg.model.clone().unwrap_or_else(|| DEFAULT_MODEL.into()),
            api_key,
            max_tokens: cfg.max_tokens.unwrap_or(1024),
            client,
        })
    }
}

/// One user message: the prompt text followed by each image as a base64 PNG data URL.
pub fn request_body(model: &str, max_tokens: u32, prompt: &str, images: &[Vec<u8>]) -> Value {
    let mut content = vec![json!({ "type": "text", "text": prompt })];
    content.extend(images.iter().map(|png| {
        json!({
            "type": "image_url",
            "image_url": { "url": format!("data:image/png;base64,{}", BASE64_STANDARD.encode(png)) }
        })
    }));
    json!({
        "model": model,
        "max_tokens": max_tokens,
        "messages": [{ "role": "user", "content": content }],
    })
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

pub fn extract_text(body: &str) -> Result<String, BackendFailure> {
    let parsed: ChatCompletionResponse =
        serde_json::from_str(body).map_err(|e| BackendFailure::Fatal(format!("unexpected response body: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| BackendFailure::Transient("response contained no message content".into()))
}

fn is_transient_status(status: u16) -> bool {
    status == 408 || status == 429 || status >= 500
}

impl VlmBackend for LiveBackend {
    fn identity(&self) -> String {
        format!("live:{}@{}", self.model, self.endpoint)
    }

    fn send(&self, req: &VlmRequest<'_>) -> Result<BackendReply, BackendFailure> {
        let body = request_body(&self.model, self.max_tokens, req.prompt, req.images);
        let started = Instant::now();
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendFailure::Transient(format!("transport: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .map_err(|e| BackendFailure::Transient(format!("reading body: {e}")))?;
        if !(200..300).contains(&status) {
            let detail = format!("HTTP {status}: {}", text.chars().take(300).collect::<String>());
            return Err(if is_transient_status(status) {
                BackendFailure::Transient(detail)
            } else {
                BackendFailure::Fatal(detail)
            });
        }
        let content = extract_text(&text)?;
        Ok(BackendReply {
            text: content,
            latency: Some(started.elapsed().as_secs_f64()),
        })
    }
}
