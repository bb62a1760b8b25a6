//! Blocking chat-completion client for OpenAI-compatible endpoints.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::agent::prompt::{ChatFormat, InstructingVariant, MemoryWindow};
use crate::error::{Error, Result};

/// Remote-backend settings for one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Base URL; requests go to `{endpoint_url}/chat/completions`.
    pub endpoint_url: String,
    pub model_id: String,
    pub temperature: f64,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env_var: String,
    /// Total request attempts per decision, including the first.
    pub max_retries: u32,
    /// Sleep before attempt i+1; the last entry repeats.
    pub retry_backoff_ms: Vec<u64>,
    pub request_timeout_secs: u64,
    pub memory_window: MemoryWindow,
    pub instructing_variant: InstructingVariant,
    pub chat_format: ChatFormat,
    /// Token-bucket rate limit shared by all games against this endpoint.
    pub requests_per_minute: Option<u32>,
    /// Trace label; defaults to the model id.
    pub label: Option<String>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint_url: String::new(),
            model_id: String::new(),
            temperature: 0.7,
            api_key_env_var: "IPD_API_KEY".into(),
            max_retries: 3,
            retry_backoff_ms: vec![250, 1000, 4000],
            request_timeout_secs: 60,
            memory_window: MemoryWindow::default(),
            instructing_variant: InstructingVariant::default(),
            chat_format: ChatFormat::default(),
            requests_per_minute: None,
            label: None,
        }
    }
}

impl RemoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.endpoint_url.is_empty() {
            return Err(Error::Config("remote endpoint_url is empty".into()));
        }
        if self.model_id.is_empty() {
            return Err(Error::Config("remote model_id is empty".into()));
        }
        // above 1.0 the models emit unusable token soup
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(Error::Config(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        if self.max_retries == 0 {
            return Err(Error::Config("max_retries must be >= 1".into()));
        }
        self.memory_window.validate()?;
        Ok(())
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.model_id.clone())
    }
}

/// One message of the chat-completion request body.
#[derive(Clone, Debug, Serialize)]
pub struct ChatMessage {
    pub role: &'static str,
    pub content: String,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

/// Token bucket; `acquire` blocks until a token is available.
pub struct RateLimiter {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn per_minute(requests: u32) -> Self {
        let capacity = requests.max(1) as f64;
        RateLimiter {
            capacity,
            refill_per_sec: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                let (ref mut tokens, ref mut last) = *state;
                let now = Instant::now();
                *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.refill_per_sec)
                    .min(self.capacity);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - *tokens) / self.refill_per_sec)
            };
            std::thread::sleep(wait);
        }
    }
}

/// A configured connection to one endpoint. Cheap to share across games;
/// holds the rate limiter and the request counter.
pub struct ChatClient {
    http: reqwest::blocking::Client,
    cfg: RemoteConfig,
    api_key: String,
    limiter: Option<RateLimiter>,
    requests: AtomicU64,
}

impl ChatClient {
    /// Reads the API key from the configured environment variable.
    pub fn new(cfg: RemoteConfig) -> Result<Self> {
        cfg.validate()?;
        let api_key = std::env::var(&cfg.api_key_env_var)
            .map_err(|_| Error::MissingApiKey(cfg.api_key_env_var.clone()))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.request_timeout_secs))
            .build()
            .map_err(|e| Error::Http(e.to_string()))?;
        let limiter = cfg.requests_per_minute.map(RateLimiter::per_minute);
        Ok(ChatClient { http, cfg, api_key, limiter, requests: AtomicU64::new(0) })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    /// Issue one chat-completion request and return the reply content.
    /// No retries here; the caller owns the retry policy.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        self.requests.fetch_add(1, Ordering::Relaxed);
        let url = format!(
            "{}/chat/completions",
            self.cfg.endpoint_url.trim_end_matches('/')
        );
        let body = ChatRequest {
            model: &self.cfg.model_id,
            temperature: self.cfg.temperature,
            messages,
        };
        let response = self
            .http
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| Error::Http(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            let text: String = text.chars().take(200).collect();
            return Err(Error::Http(format!("status {status}: {text}")));
        }
        let parsed: ChatResponse = response.json().map_err(|e| Error::Http(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Error::Http("reply carried no choices[0].message.content".into()))
    }

    /// Sleep duration before retry attempt `attempt` (0-based).
    pub fn backoff(&self, attempt: usize) -> Duration {
        let ms = match self.cfg.retry_backoff_ms.as_slice() {
            [] => 0,
            steps => steps[attempt.min(steps.len() - 1)],
        };
        Duration::from_millis(ms)
    }
}
