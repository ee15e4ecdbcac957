//! Provider layer: request/response types, throttling, retries, caching,
//! and the pluggable backends that actually produce completions.
//!
//! A [`Backend`] performs exactly one attempt. [`ProviderPool`] owns the
//! policy around it: auth checks before any I/O, a concurrency cap and
//! pacing per provider, exponential backoff with full jitter on retryable
//! failures, and an optional content-addressed response cache.

mod cache;
mod http;
mod limiter;
mod mock;

pub use cache::{CacheEntry, ResponseCache};
pub use http::{GeminiCompatible, OpenAiCompatible};
pub use limiter::RateLimiter;
pub use mock::{load_mock, MockScript, MockScriptError, ScriptedMockBackend, MOCK_CALL_LOG_ENV};

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{canonical_digest, Sampling, StageName};

/// Env var overriding the cache directory from run configs.
pub const CACHE_DIR_ENV: &str = "VIC_CACHE_DIR";

/// One part of a model prompt. Image bytes never enter the digest; the
/// content hash stands in for them so equal images hash equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MessagePart {
    Text {
        content: String,
    },
    Image {
        image_digest: String,
        #[serde(skip)]
        bytes: Option<Arc<Vec<u8>>>,
    },
}

impl MessagePart {
    pub fn text(content: impl Into<String>) -> Self {
        MessagePart::Text {
            content: content.into(),
        }
    }

    pub fn image(bytes: Vec<u8>) -> Self {
        MessagePart::Image {
            image_digest: crate::model::bytes_digest(&bytes),
            bytes: Some(Arc::new(bytes)),
        }
    }
}

/// Routing tag identifying which item and pipeline stage issued a request.
/// Part of the canonical digest, so equal prompts for different items keep
/// distinct cache identities and scripted backends can route responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestTag {
    pub item_id: String,
    pub stage: StageName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub provider_id: String,
    pub model_id: String,
    pub parts: Vec<MessagePart>,
    pub sampling: Sampling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<RequestTag>,
}

impl ModelRequest {
    pub fn digest(&self) -> String {
        canonical_digest(self)
    }

    pub fn has_image(&self) -> bool {
        self.parts
            .iter()
            .any(|p| matches!(p, MessagePart::Image { .. }))
    }

    /// Total prompt text length in chars (images excluded).
    pub fn prompt_chars(&self) -> u64 {
        self.parts
            .iter()
            .map(|p| match p {
                MessagePart::Text { content } => content.chars().count() as u64,
                MessagePart::Image { .. } => 0,
            })
            .sum()
    }

    /// Concatenated text parts; what a text-only inspection of the prompt sees.
    pub fn prompt_text(&self) -> String {
        let mut out = String::new();
        for p in &self.parts {
            if let MessagePart::Text { content } = p {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(content);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Refusal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResponse {
    pub text: String,
    pub finish: FinishReason,
    pub from_cache: bool,
}

/// Raw single-attempt result from a backend.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendResponse {
    pub text: String,
    pub finish: FinishReason,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("http {status}: {body}")]
    Http { status: u16, body: String },
    #[error("mock script has no entry for item {item_id:?} stage {stage}")]
    MockMissing { item_id: String, stage: StageName },
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetryOn {
    Timeout,
    Http429,
    Http5xx,
}

impl BackendError {
    /// The retry class this failure belongs to, if it is retryable at all.
    /// Transport-level failures (timeouts, connection resets) share the
    /// `timeout` class.
    fn retry_class(&self) -> Option<RetryOn> {
        match self {
            BackendError::Timeout(_) => Some(RetryOn::Timeout),
            BackendError::Http { status: 429, .. } => Some(RetryOn::Http429),
            BackendError::Http { status, .. } if (500..600).contains(status) => {
                Some(RetryOn::Http5xx)
            }
            _ => None,
        }
    }
}

pub trait Backend: Send + Sync {
    /// Perform exactly one completion attempt.
    fn invoke(&self, req: &ModelRequest) -> Result<BackendResponse, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    OpenaiCompat,
    GeminiCompat,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub max_concurrent: usize,
    pub min_interval_ms: u64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            max_concurrent: 4,
            min_interval_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryConfig {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
    pub retry_on: Vec<RetryOn>,
}

impl Default for RetryConfig {
    fn default() -> Self {
        RetryConfig {
            max_attempts: 3,
            base_backoff_ms: 200,
            retry_on: vec![RetryOn::Timeout, RetryOn::Http429, RetryOn::Http5xx],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub id: String,
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    /// Env var holding the API key; defaults to `VIC_API_KEY_<ID>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
    #[serde(default)]
    pub rate: RateConfig,
    #[serde(default)]
    pub retry: RetryConfig,
    /// Mock kind only: path to the script file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<std::path::PathBuf>,
}

impl ProviderConfig {
    pub fn mock(id: impl Into<String>) -> Self {
        ProviderConfig {
            id: id.into(),
            kind: ProviderKind::Mock,
            base_url: None,
            api_key_env: None,
            timeout_ms: None,
            rate: RateConfig::default(),
            retry: RetryConfig::default(),
            script: None,
        }
    }

    pub fn api_key_env(&self) -> String {
        self.api_key_env.clone().unwrap_or_else(|| {
            format!(
                "VIC_API_KEY_{}",
                self.id.to_ascii_uppercase().replace('-', "_")
            )
        })
    }

    pub fn timeout_ms(&self) -> u64 {
        self.timeout_ms.unwrap_or(60_000)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("provider id must be non-empty".into());
        }
        if self.rate.max_concurrent == 0 {
            return Err(format!("provider {}: rate.max_concurrent must be >= 1", self.id));
        }
        if self.retry.max_attempts == 0 {
            return Err(format!("provider {}: retry.max_attempts must be >= 1", self.id));
        }
        match self.kind {
            ProviderKind::Mock => Ok(()),
            _ => {
                if self.base_url.as_deref().map_or(true, |u| u.trim().is_empty()) {
                    Err(format!("provider {}: base_url is required", self.id))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("unknown provider {provider:?}")]
    UnknownProvider { provider: String },
    #[error("provider {provider}: api key env {env} is not set")]
    Auth { provider: String, env: String },
    #[error("provider {provider}: content refusal: {text}")]
    Refusal { provider: String, text: String },
    #[error("provider {provider}: gave up after {attempts} attempts: {last}")]
    Exhausted {
        provider: String,
        attempts: u32,
        last: String,
    },
    #[error("provider {provider}: {source}")]
    Backend {
        provider: String,
        #[source]
        source: BackendError,
    },
}

struct ProviderEntry {
    config: ProviderConfig,
    backend: Arc<dyn Backend>,
    limiter: RateLimiter,
    calls: AtomicU64,
}

/// Registry of providers plus the shared single-flight table for cached
/// completions.
pub struct ProviderPool {
    providers: HashMap<String, ProviderEntry>,
    in_flight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ProviderPool {
    pub fn new() -> Self {
        ProviderPool {
            providers: HashMap::new(),
            in_flight: Mutex::new(HashMap::new()),
        }
    }

    pub fn register(&mut self, config: ProviderConfig, backend: Arc<dyn Backend>) {
        let limiter = RateLimiter::new(config.rate.max_concurrent, config.rate.min_interval_ms);
        self.providers.insert(
            config.id.clone(),
            ProviderEntry {
                config,
                backend,
                limiter,
                calls: AtomicU64::new(0),
            },
        );
    }

    pub fn has_provider(&self, id: &str) -> bool {
        self.providers.contains_key(id)
    }

    /// Backend attempts performed for a provider since pool creation.
    pub fn backend_calls(&self, id: &str) -> u64 {
        self.providers
            .get(id)
            .map(|e| e.calls.load(Ordering::SeqCst))
            .unwrap_or(0)
    }

    fn entry(&self, id: &str) -> Result<&ProviderEntry, ProviderError> {
        self.providers
            .get(id)
            .ok_or_else(|| ProviderError::UnknownProvider {
                provider: id.to_string(),
            })
    }

    fn check_auth(entry: &ProviderEntry) -> Result<(), ProviderError> {
        if matches!(entry.config.kind, ProviderKind::Mock) {
            return Ok(());
        }
        let env = entry.config.api_key_env();
        match std::env::var(&env) {
            Ok(v) if !v.trim().is_empty() => Ok(()),
            _ => Err(ProviderError::Auth {
                provider: entry.config.id.clone(),
                env,
            }),
        }
    }

    /// Dispatch with throttling and retries; refusals come back as `Ok`
    /// with `finish == Refusal` so callers can persist them.
    fn complete_raw(&self, req: &ModelRequest) -> Result<BackendResponse, ProviderError> {
        let entry = self.entry(&req.provider_id)?;
        Self::check_auth(entry)?;
        let _permit = entry.limiter.acquire();
        let max_attempts = entry.config.retry.max_attempts;
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            entry.limiter.pace();
            entry.calls.fetch_add(1, Ordering::SeqCst);
            let err = match entry.backend.invoke(req) {
                Ok(resp) => return Ok(resp),
                Err(e) => e,
            };
            let retryable = err
                .retry_class()
                .map_or(false, |c| entry.config.retry.retry_on.contains(&c));
            if !retryable {
                return Err(ProviderError::Backend {
                    provider: entry.config.id.clone(),
                    source: err,
                });
            }
            if attempt >= max_attempts {
                return Err(ProviderError::Exhausted {
                    provider: entry.config.id.clone(),
                    attempts: attempt,
                    last: err.to_string(),
                });
            }
            let ceiling = entry
                .config
                .retry
                .base_backoff_ms
                .saturating_mul(1u64 << (attempt - 1).min(16));
            let backoff = if ceiling == 0 {
                0
            } else {
                rand::thread_rng().gen_range(0..=ceiling)
            };
            std::thread::sleep(std::time::Duration::from_millis(backoff));
        }
    }

    fn finish_response(
        &self,
        provider: &str,
        text: String,
        finish: FinishReason,
        from_cache: bool,
    ) -> Result<ModelResponse, ProviderError> {
        if finish == FinishReason::Refusal {
            return Err(ProviderError::Refusal {
                provider: provider.to_string(),
                text,
            });
        }
        Ok(ModelResponse {
            text,
            finish,
            from_cache,
        })
    }

    /// Complete without a cache.
    pub fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ProviderError> {
        let resp = self.complete_raw(req)?;
        self.finish_response(&req.provider_id, resp.text, resp.finish, false)
    }

    /// Complete through the response cache. Hits skip the backend entirely;
    /// misses are single-flighted per digest within this process, and the
    /// response (including refusals) is persisted before returning.
    pub fn complete_cached(
        &self,
        req: &ModelRequest,
        cache: &ResponseCache,
    ) -> Result<ModelResponse, ProviderError> {
        let digest = req.digest();
        if let Some(entry) = cache.get(&digest) {
            return self.finish_response(&req.provider_id, entry.text, entry.finish, true);
        }
        let gate = {
            let mut map = self.in_flight.lock().unwrap();
            Arc::clone(map.entry(digest.clone()).or_default())
        };
        let _guard = gate.lock().unwrap();
        // A racing thread may have filled the entry while we waited.
        if let Some(entry) = cache.get(&digest) {
            self.release_gate(&digest, &gate);
            return self.finish_response(&req.provider_id, entry.text, entry.finish, true);
        }
        let result = self.complete_raw(req);
        if let Ok(resp) = &result {
            let entry = ResponseCache::make_entry(&digest, &req.model_id, &resp.text, resp.finish);
            let _ = cache.put(&entry);
        }
        self.release_gate(&digest, &gate);
        let resp = result?;
        self.finish_response(&req.provider_id, resp.text, resp.finish, false)
    }

    fn release_gate(&self, digest: &str, gate: &Arc<Mutex<()>>) {
        let mut map = self.in_flight.lock().unwrap();
        // Drop the table slot once only waiters inside this call hold it.
        if Arc::strong_count(gate) <= 2 {
            map.remove(digest);
        }
    }
}

impl Default for ProviderPool {
    fn default() -> Self {
        Self::new()
    }
}
