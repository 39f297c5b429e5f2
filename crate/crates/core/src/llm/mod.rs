//! Completion backends.
//!
//! Everything that talks to a language model goes through [`Backend`]. Three
//! implementations ship: [`HttpBackend`] for a chat/completions-style
//! endpoint, [`ScriptedMock`] for offline runs, and [`CachedBackend`] which
//! records responses to disk and replays them.

mod cache;
mod http;
mod mock;
mod ratelimit;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cache_key, cached_complete, CacheKey, CacheMode, CachedBackend};
pub use http::{HttpBackend, HttpBackendConfig, ENV_API_KEY, ENV_BASE_URL};
pub use mock::{MockRule, RuleMatch, ScriptedMock};
pub use ratelimit::RateLimiter;

pub const DEFAULT_TEMPERATURE: f64 = 0.01;
pub const DEFAULT_FINAL_SAMPLES: u32 = 8;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("rate limited (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },
    #[error("provider error {status}: {body}")]
    ProviderError { status: u16, body: String },
    #[error("no recorded response for {0} in replay-only mode")]
    ReplayMiss(String),
    #[error("corrupt cache entry at {0}")]
    CacheCorrupt(String),
    #[error("mock script has no rule matching prompt starting {0:?}")]
    NoMatchingRule(String),
    #[error("cache i/o: {0}")]
    Io(String),
}

/// Sampling parameters for one step of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub n_samples: u32,
    pub max_tokens: u32,
}

impl Sampling {
    /// Final prediction steps: eight low-temperature samples, averaged.
    pub const fn final_prediction() -> Self {
        Sampling {
            temperature: DEFAULT_TEMPERATURE,
            n_samples: DEFAULT_FINAL_SAMPLES,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// Intermediate chain steps: a single sample.
    pub const fn intermediate() -> Self {
        Sampling {
            temperature: DEFAULT_TEMPERATURE,
            n_samples: 1,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn with_samples(self, n_samples: u32) -> Self {
        Sampling { n_samples, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub n_samples: u32,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop: Option<Vec<String>>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, sampling: Sampling) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: sampling.temperature,
            n_samples: sampling.n_samples,
            max_tokens: sampling.max_tokens,
            stop: None,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.n_samples == 0 {
            return Err(LlmError::InvalidRequest("n_samples must be >= 1".into()));
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} must be a finite non-negative value",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub texts: Vec<String>,
    pub backend_id: String,
    #[serde(default)]
    pub cached: bool,
}

pub trait Backend: Send + Sync {
    /// Stable identifier, part of every cache key.
    fn id(&self) -> &str;

    /// Returns exactly `req.n_samples` texts.
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError>;
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        (**self).complete(req)
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        (**self).complete(req)
    }
}

/// Free-function form of [`Backend::complete`] that also checks the request
/// and the sample-count contract of the response.
pub fn complete(backend: &dyn Backend, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
    req.validate()?;
    let resp = backend.complete(req)?;
    if resp.texts.len() != req.n_samples as usize {
        return Err(LlmError::ProviderError {
            status: 200,
            body: format!(
                "backend returned {} texts for {} samples",
                resp.texts.len(),
                req.n_samples
            ),
        });
    }
    Ok(resp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        let mut req = CompletionRequest::new("p", Sampling::final_prediction());
        assert!(req.validate().is_ok());
        req.n_samples = 0;
        assert!(req.validate().is_err());
        req.n_samples = 1;
        req.temperature = -0.5;
        assert!(req.validate().is_err());
        req.temperature = f64::NAN;
        assert!(req.validate().is_err());
    }

    #[test]
    fn defaults() {
        let s = Sampling::final_prediction();
        assert_eq!((s.temperature, s.n_samples, s.max_tokens), (0.01, 8, 1024));
        assert_eq!(Sampling::intermediate().n_samples, 1);
    }
}
