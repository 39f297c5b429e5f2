//! Live backend for chat/completions-style HTTP endpoints.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::json;

use super::{Backend, CompletionRequest, CompletionResponse, LlmError, RateLimiter};

pub const ENV_BASE_URL: &str = "FORESIGHT_LLM_BASE_URL";
pub const ENV_API_KEY: &str = "FORESIGHT_LLM_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    /// Requests per second across all threads.
    pub requests_per_second: f64,
    /// Send `n` to the provider instead of one call per sample.
    pub native_multi_sample: bool,
    pub timeout: Duration,
    /// Retries after a 429 before surfacing `RateLimited`.
    pub max_rate_limit_retries: u32,
    /// Upper bound on how long a single `Retry-After` may make us wait.
    pub max_retry_wait: Duration,
}

impl HttpBackendConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpBackendConfig {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            requests_per_second: 1.0,
            native_multi_sample: false,
            timeout: Duration::from_secs(120),
            max_rate_limit_retries: 3,
            max_retry_wait: Duration::from_secs(60),
        }
    }

    /// Reads the endpoint and key from the environment.
    pub fn from_env(model: impl Into<String>) -> Result<Self, LlmError> {
        let base = std::env::var(ENV_BASE_URL)
            .map_err(|_| LlmError::BackendUnavailable(format!("{ENV_BASE_URL} is not set")))?;
        let mut cfg = Self::new(base, model);
        cfg.api_key = std::env::var(ENV_API_KEY).ok();
        Ok(cfg)
    }
}

pub struct HttpBackend {
    id: String,
    cfg: HttpBackendConfig,
    client: Client,
    limiter: Arc<RateLimiter>,
    calls: AtomicUsize,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Option<Message>,
    text: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(cfg: HttpBackendConfig) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        Ok(HttpBackend {
            id: format!("live:{}", cfg.model),
            limiter: Arc::new(RateLimiter::new(cfg.requests_per_second)),
            cfg,
            client,
            calls: AtomicUsize::new(0),
        })
    }

    /// Provider calls issued so far, retries included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    fn call(&self, req: &CompletionRequest, n: u32) -> Result<Vec<String>, LlmError> {
        let mut body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "n": n,
        });
        if let Some(stop) = &req.stop {
            body["stop"] = json!(stop);
        }

        let mut attempt = 0;
        loop {
            self.limiter.acquire();
            self.calls.fetch_add(1, Ordering::SeqCst);
            let mut builder = self.client.post(self.endpoint()).json(&body);
            if let Some(key) = &self.cfg.api_key {
                builder = builder.bearer_auth(key);
            }
            let resp = builder
                .send()
                .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
            let status = resp.status();

            if status == StatusCode::TOO_MANY_REQUESTS {
                let retry_after = resp
                    .headers()
                    .get(reqwest::header::RETRY_AFTER)
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .map(Duration::from_secs_f64);
                if attempt >= self.cfg.max_rate_limit_retries {
                    return Err(LlmError::RateLimited { retry_after });
                }
                attempt += 1;
                let wait = retry_after
                    .unwrap_or(Duration::from_secs(1))
                    .min(self.cfg.max_retry_wait);
                log::warn!("rate limited by provider, retrying in {wait:?} (attempt {attempt})");
                std::thread::sleep(wait);
                continue;
            }
            if !status.is_success() {
                let body = resp.text().unwrap_or_default();
                return Err(LlmError::ProviderError {
                    status: status.as_u16(),
                    body,
                });
            }
            let parsed: ChatResponse = resp.json().map_err(|e| LlmError::ProviderError {
                status: status.as_u16(),
                body: format!("unreadable response: {e}"),
            })?;
            return Ok(parsed
                .choices
                .into_iter()
                .map(|c| {
                    c.message
                        .and_then(|m| m.content)
                        .or(c.text)
                        .unwrap_or_default()
                })
                .collect());
        }
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        req.validate()?;
        let texts = if self.cfg.native_multi_sample {
            self.call(req, req.n_samples)?
        } else {
            let mut texts = Vec::with_capacity(req.n_samples as usize);
            for _ in 0..req.n_samples {
                texts.extend(self.call(req, 1)?.into_iter().take(1));
            }
            texts
        };
        if texts.len() != req.n_samples as usize {
            return Err(LlmError::ProviderError {
                status: 200,
                body: format!("expected {} completions, got {}", req.n_samples, texts.len()),
            });
        }
        Ok(CompletionResponse {
            texts,
            backend_id: self.id.clone(),
            cached: false,
        })
    }
}
