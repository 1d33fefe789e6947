//! Chat-completions client with retry, backoff, and request pacing.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompt::ChatMessage;
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::rouge::RougeVariant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Environment variable holding the API key; `None` sends no credentials.
    pub api_key_env: Option<String>,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub min_request_interval: Duration,
    pub backoff_base: Duration,
    pub backoff_max: Duration,
    pub timeout: Duration,
    /// Token budget for each note placed in a prompt.
    pub max_prompt_tokens: Option<usize>,
    pub ranking_metric: RougeVariant,
}

impl Default for ChatEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-3.5-turbo".into(),
            temperature: 0.7,
            max_output_tokens: 2048,
            api_key_env: Some("OPENAI_API_KEY".into()),
            max_retries: 5,
            max_in_flight: 4,
            min_request_interval: Duration::ZERO,
            backoff_base: Duration::from_millis(500),
            backoff_max: Duration::from_secs(30),
            timeout: Duration::from_secs(120),
            max_prompt_tokens: None,
            ranking_metric: RougeVariant::R1,
        }
    }
}

impl ChatEndpointConfig {
    pub fn for_base_url(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key_env: None,
            ..Self::default()
        }
    }

    /// Recognized keys: `base_url`, `model`, `temperature`, `max_tokens`,
    /// `api_key_env` (empty for none), `max_retries`, `max_in_flight`,
    /// `min_request_interval_ms`, `backoff_base_ms`, `backoff_max_ms`,
    /// `timeout_secs`, `max_prompt_tokens`, `ranking_metric`. Other keys are
    /// left for the caller.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(v) = kv.get("base_url") {
            cfg.base_url = v.to_string();
        }
        if let Some(v) = kv.get("model") {
            cfg.model_name = v.to_string();
        }
        if let Some(v) = kv.parsed("temperature")? {
            cfg.temperature = v;
        }
        if let Some(v) = kv.parsed("max_tokens")? {
            cfg.max_output_tokens = v;
        }
        if let Some(v) = kv.get("api_key_env") {
            cfg.api_key_env = (!v.is_empty()).then(|| v.to_string());
        }
        if let Some(v) = kv.parsed("max_retries")? {
            cfg.max_retries = v;
        }
        if let Some(v) = kv.parsed("max_in_flight")? {
            cfg.max_in_flight = v;
        }
        if let Some(v) = kv.parsed("min_request_interval_ms")? {
            cfg.min_request_interval = Duration::from_millis(v);
        }
        if let Some(v) = kv.parsed("backoff_base_ms")? {
            cfg.backoff_base = Duration::from_millis(v);
        }
        if let Some(v) = kv.parsed("backoff_max_ms")? {
            cfg.backoff_max = Duration::from_millis(v);
        }
        if let Some(v) = kv.parsed("timeout_secs")? {
            cfg.timeout = Duration::from_secs(v);
        }
        if let Some(v) = kv.parsed("max_prompt_tokens")? {
            cfg.max_prompt_tokens = Some(v);
        }
        if let Some(v) = kv.parsed("ranking_metric")? {
            cfg.ranking_metric = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::from_file(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_url.trim().is_empty() {
            return Err(Error::Config("base_url must be non-empty".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    fn api_key(&self) -> Result<Option<String>> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| Error::Config(format!("API key variable {var} is not set"))),
        }
    }

    /// Delay before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.min(16));
        self.backoff_base
            .saturating_mul(factor)
            .min(self.backoff_max)
    }
}

/// Why a call produced no usable text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallFailure {
    ContentFiltered {
        request_id: String,
    },
    ExhaustedRetries {
        request_id: String,
        last_error: String,
    },
    EmptyResponse {
        request_id: String,
    },
    /// Non-retryable protocol or configuration failure; aborts a run.
    Fatal {
        request_id: String,
        message: String,
    },
}

/// Anything that can complete a chat.
pub trait ChatBackend: Send + Sync {
    fn complete(
        &self,
        request_id: &str,
        messages: &[ChatMessage],
    ) -> std::result::Result<String, CallFailure>;
}

/// Caps concurrent requests and spaces request start times.
#[derive(Debug)]
pub struct RequestGate {
    max_in_flight: usize,
    min_interval: Duration,
    in_flight: Mutex<usize>,
    released: Condvar,
    last_start: Mutex<Option<Instant>>,
}

pub struct GatePermit<'a> {
    gate: &'a RequestGate,
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        let mut n = self
            .gate
            .in_flight
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.gate.released.notify_one();
    }
}

impl RequestGate {
    pub fn new(max_in_flight: usize, min_interval: Duration) -> Self {
        Self {
            max_in_flight: max_in_flight.max(1),
            min_interval,
            in_flight: Mutex::new(0),
            released: Condvar::new(),
            last_start: Mutex::new(None),
        }
    }

    /// Blocks until a slot is free and the pacing interval has elapsed.
    pub fn acquire(&self) -> GatePermit<'_> {
        {
            let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
            while *n >= self.max_in_flight {
                n = self.released.wait(n).unwrap_or_else(|e| e.into_inner());
            }
            *n += 1;
        }
        let mut last = self.last_start.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let ready = prev + self.min_interval;
            let now = Instant::now();
            if ready > now {
                std::thread::sleep(ready - now);
            }
        }
        *last = Some(Instant::now());
        GatePermit { gate: self }
    }
}

#[derive(Debug, Default)]
pub struct ClientStats {
    pub requests: AtomicUsize,
    pub retries: AtomicUsize,
}

pub struct HttpChatClient {
    config: ChatEndpointConfig,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
    gate: RequestGate,
    stats: ClientStats,
}

enum Attempt {
    Done(String),
    Filtered,
    Empty,
    Retry {
        error: String,
        wait: Option<Duration>,
    },
    Fatal(String),
}

impl HttpChatClient {
    pub fn new(config: ChatEndpointConfig) -> Result<Self> {
        config.validate()?;
        let api_key = config.api_key()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Config(format!("cannot build HTTP client: {e}")))?;
        let gate = RequestGate::new(config.max_in_flight, config.min_request_interval);
        Ok(Self {
            config,
            api_key,
            http,
            gate,
            stats: ClientStats::default(),
        })
    }

    pub fn config(&self) -> &ChatEndpointConfig {
        &self.config
    }

    /// Total HTTP requests issued, including retries.
    pub fn requests_sent(&self) -> usize {
        self.stats.requests.load(Ordering::Relaxed)
    }

    pub fn retries(&self) -> usize {
        self.stats.retries.load(Ordering::Relaxed)
    }

    fn url(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn attempt(&self, request_id: &str, body: &Value) -> Attempt {
        let _permit = self.gate.acquire();
        self.stats.requests.fetch_add(1, Ordering::Relaxed);
        let mut req = self
            .http
            .post(self.url())
            .header("X-Request-Id", request_id)
            .json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry {
                    error: e.to_string(),
                    wait: None,
                }
            }
        };
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry {
                    error: e.to_string(),
                    wait: None,
                }
            }
        };
        classify(status.as_u16(), &text, retry_after)
    }
}

fn is_moderation_body(body: &str) -> bool {
    if let Ok(v) = serde_json::from_str::<Value>(body) {
        let err = &v["error"];
        if err["code"] == "content_filter" || err["type"] == "content_filter" {
            return true;
        }
    }
    let lower = body.to_ascii_lowercase();
    lower.contains("content_filter")
        || lower.contains("moderation")
        || lower.contains("content management policy")
}

fn classify(status: u16, body: &str, retry_after: Option<Duration>) -> Attempt {
    match status {
        200..=299 => {
            let Ok(v) = serde_json::from_str::<Value>(body) else {
                return Attempt::Fatal(format!("response is not JSON: {}", truncate(body)));
            };
            let choice = &v["choices"][0];
            if choice["finish_reason"] == "content_filter" {
                return Attempt::Filtered;
            }
            match choice["message"]["content"].as_str() {
                Some(text) if !text.trim().is_empty() => Attempt::Done(text.to_string()),
                _ => Attempt::Empty,
            }
        }
        429 | 500..=599 => Attempt::Retry {
            error: format!("HTTP {status}: {}", truncate(body)),
            wait: retry_after,
        },
        _ if is_moderation_body(body) => Attempt::Filtered,
        _ => Attempt::Fatal(format!("HTTP {status}: {}", truncate(body))),
    }
}

fn truncate(body: &str) -> &str {
    match body.char_indices().nth(200) {
        Some((i, _)) => &body[..i],
        None => body,
    }
}

impl ChatBackend for HttpChatClient {
    fn complete(
        &self,
        request_id: &str,
        messages: &[ChatMessage],
    ) -> std::result::Result<String, CallFailure> {
        let body = json!({
            "model": self.config.model_name,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        });
        let mut attempt = 0;
        loop {
            match self.attempt(request_id, &body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Filtered => {
                    return Err(CallFailure::ContentFiltered {
                        request_id: request_id.to_string(),
                    })
                }
                Attempt::Empty => {
                    return Err(CallFailure::EmptyResponse {
                        request_id: request_id.to_string(),
                    })
                }
                Attempt::Fatal(message) => {
                    return Err(CallFailure::Fatal {
                        request_id: request_id.to_string(),
                        message,
                    })
                }
                Attempt::Retry { error, wait } => {
                    if attempt >= self.config.max_retries {
                        return Err(CallFailure::ExhaustedRetries {
                            request_id: request_id.to_string(),
                            last_error: error,
                        });
                    }
                    let delay = wait.map_or_else(
                        || self.config.backoff(attempt),
                        |w| w.min(self.config.backoff_max),
                    );
                    tracing::debug!(request_id, attempt, ?delay, %error, "retrying");
                    self.stats.retries.fetch_add(1, Ordering::Relaxed);
                    std::thread::sleep(delay);
                    attempt += 1;
                }
            }
        }
    }
}
