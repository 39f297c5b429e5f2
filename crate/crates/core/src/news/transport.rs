use std::time::Duration;

use super::NewsError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Minimal GET interface the news clients are written against.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, query: &[(String, String)]) -> Result<HttpReply, NewsError>;
}

/// Blocking reqwest transport with a per-request timeout.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, NewsError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| NewsError::NetworkError(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn get(&self, url: &str, query: &[(String, String)]) -> Result<HttpReply, NewsError> {
        let resp = self
            .client
            .get(url)
            .query(query)
            .send()
            .map_err(|e| NewsError::NetworkError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .text()
            .map_err(|e| NewsError::NetworkError(e.to_string()))?;
        Ok(HttpReply { status, body })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub retries: u32,
    /// Delay before the first retry; doubles after each attempt.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 2,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            retries: 0,
            base_delay: Duration::ZERO,
        }
    }

    /// Runs `op`, retrying network errors and 5xx/429 replies.
    pub(crate) fn run(
        &self,
        mut op: impl FnMut() -> Result<HttpReply, NewsError>,
    ) -> Result<HttpReply, NewsError> {
        let mut delay = self.base_delay;
        let mut attempt = 0;
        loop {
            let result = op();
            let retryable = match &result {
                Err(NewsError::NetworkError(_)) => true,
                Ok(r) => r.status >= 500 || r.status == 429,
                Err(_) => false,
            };
            if !retryable || attempt >= self.retries {
                return match result {
                    Ok(r) if !(200..300).contains(&r.status) => Err(NewsError::UpstreamError(r.status)),
                    other => other,
                };
            }
            attempt += 1;
            std::thread::sleep(delay);
            delay *= 2;
        }
    }
}
