//! HTTP backends for the two wire formats most hosted multimodal models
//! speak: OpenAI-style `/chat/completions` and Gemini-style
//! `:generateContent`. Body construction and response parsing are pure
//! functions so they can be tested without a server.

use base64::Engine;
use serde_json::{json, Value};

use super::{Backend, BackendError, BackendResponse, FinishReason, MessagePart, ModelRequest};

fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

/// Sniff the image mime type from magic bytes; callers hand us raw files.
fn image_mime(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(b"\x89PNG") {
        "image/png"
    } else if bytes.starts_with(b"\xff\xd8\xff") {
        "image/jpeg"
    } else if bytes.starts_with(b"GIF8") {
        "image/gif"
    } else if bytes.len() >= 12 && &bytes[0..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        "image/webp"
    } else {
        "image/png"
    }
}

fn image_bytes(part: &MessagePart) -> Result<&[u8], BackendError> {
    match part {
        MessagePart::Image { bytes: Some(b), .. } => Ok(b.as_slice()),
        MessagePart::Image { bytes: None, .. } => Err(BackendError::Fatal(
            "image part has no bytes loaded".to_string(),
        )),
        MessagePart::Text { .. } => unreachable!("callers filter to image parts"),
    }
}

pub fn openai_body(req: &ModelRequest) -> Result<Value, BackendError> {
    let mut content = Vec::new();
    for part in &req.parts {
        match part {
            MessagePart::Text { content: text } => {
                content.push(json!({"type": "text", "text": text}));
            }
            MessagePart::Image { .. } => {
                let bytes = image_bytes(part)?;
                let url = format!("data:{};base64,{}", image_mime(bytes), b64(bytes));
                content.push(json!({"type": "image_url", "image_url": {"url": url}}));
            }
        }
    }
    let mut body = json!({
        "model": req.model_id,
        "messages": [{"role": "user", "content": content}],
        "temperature": req.sampling.temperature,
        "max_tokens": req.sampling.max_tokens,
    });
    if let Some(seed) = req.sampling.seed {
        body["seed"] = json!(seed);
    }
    Ok(body)
}

pub fn parse_openai(value: &Value) -> Result<BackendResponse, BackendError> {
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::Fatal("response has no choices".to_string()))?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    let finish = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("length") => FinishReason::Length,
        Some("content_filter") => FinishReason::Refusal,
        _ => FinishReason::Stop,
    };
    Ok(BackendResponse { text, finish })
}

pub fn gemini_body(req: &ModelRequest) -> Result<Value, BackendError> {
    let mut parts = Vec::new();
    for part in &req.parts {
        match part {
            MessagePart::Text { content } => parts.push(json!({"text": content})),
            MessagePart::Image { .. } => {
                let bytes = image_bytes(part)?;
                parts.push(json!({
                    "inline_data": {"mime_type": image_mime(bytes), "data": b64(bytes)}
                }));
            }
        }
    }
    let mut generation = json!({
        "temperature": req.sampling.temperature,
        "maxOutputTokens": req.sampling.max_tokens,
    });
    if let Some(seed) = req.sampling.seed {
        generation["seed"] = json!(seed);
    }
    Ok(json!({
        "contents": [{"role": "user", "parts": parts}],
        "generationConfig": generation,
    }))
}

pub fn parse_gemini(value: &Value) -> Result<BackendResponse, BackendError> {
    if let Some(reason) = value.pointer("/promptFeedback/blockReason").and_then(Value::as_str) {
        return Ok(BackendResponse {
            text: format!("blocked: {reason}"),
            finish: FinishReason::Refusal,
        });
    }
    let candidate = value
        .get("candidates")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::Fatal("response has no candidates".to_string()))?;
    let text = candidate
        .pointer("/content/parts")
        .and_then(Value::as_array)
        .map(|parts| {
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join("")
        })
        .unwrap_or_default();
    let finish = match candidate.get("finishReason").and_then(Value::as_str) {
        Some("MAX_TOKENS") => FinishReason::Length,
        Some("SAFETY") | Some("BLOCKLIST") | Some("PROHIBITED_CONTENT") => FinishReason::Refusal,
        _ => FinishReason::Stop,
    };
    Ok(BackendResponse { text, finish })
}

fn send_json(
    builder: reqwest::blocking::RequestBuilder,
    body: &Value,
) -> Result<Value, BackendError> {
    let response = builder.json(body).send().map_err(map_transport)?;
    let status = response.status().as_u16();
    let text = response.text().map_err(map_transport)?;
    if !(200..300).contains(&status) {
        return Err(BackendError::Http { status, body: text });
    }
    serde_json::from_str(&text)
        .map_err(|e| BackendError::Fatal(format!("invalid JSON response: {e}")))
}

fn map_transport(e: reqwest::Error) -> BackendError {
    if e.is_timeout() || e.is_connect() {
        BackendError::Timeout(e.to_string())
    } else {
        BackendError::Fatal(e.to_string())
    }
}

fn make_client(timeout_ms: u64) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_millis(timeout_ms))
        .build()
        .expect("client builds")
}

fn api_key(env: &str) -> Result<String, BackendError> {
    std::env::var(env)
        .map_err(|_| BackendError::Fatal(format!("api key env {env} vanished mid-run")))
}

/// Backend speaking the OpenAI chat-completions wire format.
pub struct OpenAiCompatible {
    base_url: String,
    api_key_env: String,
    client: reqwest::blocking::Client,
}

impl OpenAiCompatible {
    pub fn new(base_url: impl Into<String>, api_key_env: impl Into<String>, timeout_ms: u64) -> Self {
        OpenAiCompatible {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key_env: api_key_env.into(),
            client: make_client(timeout_ms),
        }
    }
}

impl Backend for OpenAiCompatible {
    fn invoke(&self, req: &ModelRequest) -> Result<BackendResponse, BackendError> {
        let body = openai_body(req)?;
        let key = api_key(&self.api_key_env)?;
        let url = format!("{}/chat/completions", self.base_url);
        let builder = self.client.post(&url).bearer_auth(key);
        let value = send_json(builder, &body)?;
        parse_openai(&value)
    }
}

/// Backend speaking the Gemini generateContent wire format.
pub struct GeminiCompatible {
    base_url: String,
    api_key_env: String,
    client: reqwest::blocking::Client,
}

impl GeminiCompatible {
    pub fn new(base_url: impl Into<String>, api_key_env: impl Into<String>, timeout_ms: u64) -> Self {
        GeminiCompatible {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key_env: api_key_env.into(),
            client: make_client(timeout_ms),
        }
    }
}

impl Backend for GeminiCompatible {
    fn invoke(&self, req: &ModelRequest) -> Result<BackendResponse, BackendError> {
        let body = gemini_body(req)?;
        let key = api_key(&self.api_key_env)?;
        let url = format!("{}/models/{}:generateContent", self.base_url, req.model_id);
        let builder = self.client.post(&url).header("x-goog-api-key", key);
        let value = send_json(builder, &body)?;
        parse_gemini(&value)
    }
}
