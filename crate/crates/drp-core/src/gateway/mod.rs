//! Provider-neutral chat completions with deterministic mocking and a
//! persistent content-addressed cache.
//!
//! Every LLM role in the pipeline (extractor, validator, summarizer,
//! generator, judge) goes through [`Gateway::cached_complete`]. The cache
//! key covers model_id, messages, temperature and max_tokens — nothing
//! time-dependent — so identical requests never hit a provider twice and
//! multi-temperature runs keep separate entries per temperature.

mod cache;
mod mock;
mod remote;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("request timed out after {0} attempts")]
    Timeout(u32),
    #[error("HTTP error {status}")]
    Http { status: u16 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no mock fixture for digest {0}")]
    FixtureMiss(String),
    #[error("unparseable provider response: {0}")]
    Protocol(String),
    #[error("cache I/O at {path}: {source}")]
    CacheIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("provider misconfigured: {0}")]
    Config(String),
}

/// Message author role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// One chat-completion call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_hint: Option<i64>,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest(
                "messages must be nonempty".into(),
            ));
        }
        if self.messages[0].role == Role::Assistant {
            return Err(GatewayError::InvalidRequest(
                "first message must be system or user".into(),
            ));
        }
        if !self.temperature.is_finite() || !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub reasoning_trace: Option<String>,
    pub model_id: String,
    pub cached: bool,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Remote,
    Mock,
}

/// Where and how a role's completions are served.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    pub model_id: String,
    #[serde(default = "default_timeout_s")]
    pub request_timeout_s: u64,
    #[serde(default)]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    /// Directory of `<digest>.json` fixtures (mock kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_dir: Option<PathBuf>,
}

fn default_timeout_s() -> u64 {
    120
}

fn default_backoff_ms() -> u64 {
    1000
}

impl ProviderSpec {
    pub fn mock(model_id: impl Into<String>, fixture_dir: impl Into<PathBuf>) -> Self {
        ProviderSpec {
            kind: ProviderKind::Mock,
            base_url: None,
            model_id: model_id.into(),
            request_timeout_s: default_timeout_s(),
            max_retries: 0,
            backoff_base_ms: default_backoff_ms(),
            fixture_dir: Some(fixture_dir.into()),
        }
    }

    pub fn remote(model_id: impl Into<String>, base_url: impl Into<String>) -> Self {
        ProviderSpec {
            kind: ProviderKind::Remote,
            base_url: Some(base_url.into()),
            model_id: model_id.into(),
            request_timeout_s: default_timeout_s(),
            max_retries: 2,
            backoff_base_ms: default_backoff_ms(),
            fixture_dir: None,
        }
    }

    fn check(&self) -> Result<(), GatewayError> {
        match self.kind {
            ProviderKind::Remote if self.base_url.is_none() => Err(GatewayError::Config(
                "remote provider requires base_url".into(),
            )),
            ProviderKind::Mock if self.fixture_dir.is_none() => Err(GatewayError::Config(
                "mock provider requires fixture_dir".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Canonical serialization: fields in fixed order, message order
/// preserved, seed hints and anything time-dependent excluded.
#[derive(Serialize)]
struct CanonicalRequest<'a> {
    model_id: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

/// Stable 64-hex-digit digest of the canonical request serialization.
pub fn canonical_request_hash(request: &ChatRequest) -> String {
    let canonical = CanonicalRequest {
        model_id: &request.model_id,
        messages: &request.messages,
        temperature: request.temperature,
        max_tokens: request.max_tokens,
    };
    let bytes = serde_json::to_string(&canonical).expect("request serializes");
    hex::encode(Sha256::digest(bytes.as_bytes()))
}

#[derive(Serialize)]
struct WireBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

/// The exact chat-completions body sent over the wire.
pub fn wire_body(request: &ChatRequest) -> String {
    let body = WireBody {
        model: &request.model_id,
        messages: &request.messages,
        temperature: request.temperature,
        max_tokens: request.max_tokens,
    };
    serde_json::to_string(&body).expect("request serializes")
}

/// Split a `<think>…</think>` prefix off raw content.
pub fn split_reasoning(raw: &str) -> (String, Option<String>) {
    let trimmed = raw.trim_start();
    if let Some(rest) = trimmed.strip_prefix("<think>") {
        if let Some(end) = rest.find("</think>") {
            let trace = rest[..end].trim().to_string();
            let content = rest[end + "</think>".len()..].trim().to_string();
            return (content, Some(trace));
        }
    }
    (raw.trim().to_string(), None)
}

/// Counting semaphore bounding in-flight remote requests.
struct Limiter {
    permits: Mutex<usize>,
    cond: Condvar,
}

impl Limiter {
    fn new(permits: usize) -> Self {
        Limiter {
            permits: Mutex::new(permits.max(1)),
            cond: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut permits = self.permits.lock().expect("limiter lock");
        while *permits == 0 {
            permits = self.cond.wait(permits).expect("limiter wait");
        }
        *permits -= 1;
    }

    fn release(&self) {
        *self.permits.lock().expect("limiter lock") += 1;
        self.cond.notify_one();
    }
}

/// Cumulative gateway counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    /// Completions served by a provider (remote or mock), i.e. cache misses
    /// plus direct `complete` calls.
    pub provider_calls: u64,
    pub remote_calls: u64,
    pub mock_calls: u64,
    pub cache_hits: u64,
}

pub struct Gateway {
    cache_dir: Option<PathBuf>,
    http: reqwest::blocking::Client,
    limiter: Limiter,
    script_cursors: Mutex<HashMap<PathBuf, usize>>,
    provider_calls: AtomicU64,
    remote_calls: AtomicU64,
    mock_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl Gateway {
    /// `cache_dir = None` disables persistence (cached_complete degrades
    /// to complete).
    pub fn new(cache_dir: Option<PathBuf>, max_concurrency: usize) -> Result<Self, GatewayError> {
        if let Some(dir) = &cache_dir {
            std::fs::create_dir_all(dir).map_err(|source| GatewayError::CacheIo {
                path: dir.display().to_string(),
                source,
            })?;
        }
        Ok(Gateway {
            cache_dir,
            http: reqwest::blocking::Client::new(),
            limiter: Limiter::new(max_concurrency),
            script_cursors: Mutex::new(HashMap::new()),
            provider_calls: AtomicU64::new(0),
            remote_calls: AtomicU64::new(0),
            mock_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        })
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            provider_calls: self.provider_calls.load(Ordering::Relaxed),
            remote_calls: self.remote_calls.load(Ordering::Relaxed),
            mock_calls: self.mock_calls.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
        }
    }

    pub fn reset_stats(&self) {
        self.provider_calls.store(0, Ordering::Relaxed);
        self.remote_calls.store(0, Ordering::Relaxed);
        self.mock_calls.store(0, Ordering::Relaxed);
        self.cache_hits.store(0, Ordering::Relaxed);
    }

    /// One completion straight from the provider (no cache involvement).
    pub fn complete(
        &self,
        request: &ChatRequest,
        spec: &ProviderSpec,
    ) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        spec.check()?;
        let started = Instant::now();
        self.provider_calls.fetch_add(1, Ordering::Relaxed);
        let raw = match spec.kind {
            ProviderKind::Mock => {
                self.mock_calls.fetch_add(1, Ordering::Relaxed);
                mock::serve(self, request, spec)?
            }
            ProviderKind::Remote => {
                self.remote_calls.fetch_add(1, Ordering::Relaxed);
                self.limiter.acquire();
                let result = remote::serve(self, request, spec);
                self.limiter.release();
                result?
            }
        };
        let (content, stripped_trace) = split_reasoning(&raw.content);
        if content.is_empty() {
            return Err(GatewayError::Protocol(
                "provider returned empty content".into(),
            ));
        }
        Ok(ChatResponse {
            content,
            reasoning_trace: raw.reasoning_trace.or(stripped_trace),
            model_id: spec.model_id.clone(),
            cached: false,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }

    /// Cache-through completion: a hit performs zero provider calls.
    pub fn cached_complete(
        &self,
        request: &ChatRequest,
        spec: &ProviderSpec,
    ) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let Some(cache_dir) = &self.cache_dir else {
            return self.complete(request, spec);
        };
        let digest = canonical_request_hash(request);
        if let Some(stored) = cache::read(cache_dir, &digest)? {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(ChatResponse {
                content: stored.content,
                reasoning_trace: stored.reasoning_trace,
                model_id: stored.model_id,
                cached: true,
                latency_ms: stored.latency_ms,
            });
        }
        let response = self.complete(request, spec)?;
        cache::write(cache_dir, &digest, &response)?;
        Ok(response)
    }

    pub(crate) fn http_client(&self) -> &reqwest::blocking::Client {
        &self.http
    }

    pub(crate) fn next_script_index(&self, dir: &std::path::Path) -> usize {
        let mut cursors = self.script_cursors.lock().expect("cursor lock");
        let index = cursors.entry(dir.to_path_buf()).or_insert(0);
        let current = *index;
        *index += 1;
        current
    }
}

/// Raw provider payload before think-tag handling.
pub(crate) struct RawCompletion {
    pub content: String,
    pub reasoning_trace: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(content: &str) -> ChatRequest {
        ChatRequest {
            model_id: "test-model".into(),
            messages: vec![ChatMessage::system("be brief"), ChatMessage::user(content)],
            temperature: 0.0,
            max_tokens: 128,
            seed_hint: None,
        }
    }

    #[test]
    fn identical_requests_hash_identically() {
        assert_eq!(
            canonical_request_hash(&request("hi")),
            canonical_request_hash(&request("hi"))
        );
    }

    #[test]
    fn message_order_changes_hash() {
        let mut a = request("hi");
        a.messages.push(ChatMessage::user("one"));
        a.messages.push(ChatMessage::user("two"));
        let mut b = a.clone();
        b.messages.swap(2, 3);
        assert_ne!(canonical_request_hash(&a), canonical_request_hash(&b));
    }

    #[test]
    fn temperature_changes_hash_but_seed_hint_does_not() {
        let a = request("hi");
        let mut hot = a.clone();
        hot.temperature = 0.8;
        assert_ne!(canonical_request_hash(&a), canonical_request_hash(&hot));

        let mut seeded = a.clone();
        seeded.seed_hint = Some(7);
        assert_eq!(canonical_request_hash(&a), canonical_request_hash(&seeded));
    }

    #[test]
    fn wire_body_matches_protocol_shape() {
        let body = wire_body(&request("hi"));
        let value: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(value["model"], "test-model");
        assert_eq!(value["messages"][0]["role"], "system");
        assert_eq!(value["messages"][1]["content"], "hi");
        assert_eq!(value["temperature"], 0.0);
        assert_eq!(value["max_tokens"], 128);
    }

    #[test]
    fn think_prefix_is_split() {
        let (content, trace) = split_reasoning("<think>steps here</think>Answer");
        assert_eq!(content, "Answer");
        assert_eq!(trace.as_deref(), Some("steps here"));

        let (content, trace) = split_reasoning("plain answer");
        assert_eq!(content, "plain answer");
        assert!(trace.is_none());

        // Unterminated tag is left alone.
        let (content, trace) = split_reasoning("<think>oops");
        assert_eq!(content, "<think>oops");
        assert!(trace.is_none());
    }

    #[test]
    fn request_validation() {
        let mut r = request("hi");
        r.messages.clear();
        assert!(matches!(r.validate(), Err(GatewayError::InvalidRequest(_))));

        let mut r = request("hi");
        r.temperature = 3.0;
        assert!(matches!(r.validate(), Err(GatewayError::InvalidRequest(_))));

        let mut r = request("hi");
        r.messages[0].role = Role::Assistant;
        assert!(matches!(r.validate(), Err(GatewayError::InvalidRequest(_))));

        assert!(request("hi").validate().is_ok());
    }
}
