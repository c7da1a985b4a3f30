//! Minimal JSON-over-HTTP client shared by the remote embedder and LLM client.

use std::time::Duration;

use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum HttpError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("{0}")]
    Malformed(String),
}

impl HttpError {
    fn retryable(&self) -> bool {
        match self {
            HttpError::Transport(_) => true,
            HttpError::Status { status, .. } => *status == 429 || *status >= 500,
            HttpError::Malformed(_) => false,
        }
    }
}

/// Retries after transport failures, 429 and 5xx, with exponential backoff
/// (`base_delay`, `2 * base_delay`, ...). `max_retries = 2` means at most
/// three attempts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

#[derive(Clone)]
pub struct JsonClient {
    client: reqwest::blocking::Client,
    bearer: Option<String>,
}

impl std::fmt::Debug for JsonClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JsonClient")
            .field("bearer", &self.bearer.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl JsonClient {
    pub fn new(bearer: Option<String>, timeout: Duration) -> Result<Self, HttpError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| HttpError::Transport(e.to_string()))?;
        Ok(Self { client, bearer })
    }

    /// Reads a bearer token from `var`, treating unset or empty as none.
    pub fn from_env(var: &str, timeout: Duration) -> Result<Self, HttpError> {
        let bearer = std::env::var(var).ok().filter(|s| !s.is_empty());
        Self::new(bearer, timeout)
    }

    pub fn post(&self, url: &str, body: &Value, retry: &RetryPolicy) -> Result<Value, HttpError> {
        let mut attempt = 0u32;
        loop {
            match self.post_once(url, body) {
                Ok(v) => return Ok(v),
                Err(e) if e.retryable() && attempt < retry.max_retries => {
                    let delay = retry.base_delay.saturating_mul(1u32 << attempt.min(16));
                    log::warn!(
                        "POST {url} failed ({e}); retry {} in {delay:?}",
                        attempt + 1
                    );
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn post_once(&self, url: &str, body: &Value) -> Result<Value, HttpError> {
        let mut request = self.client.post(url).json(body);
        if let Some(token) = &self.bearer {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| HttpError::Transport(e.without_url().to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| HttpError::Transport(e.without_url().to_string()))?;
        if !status.is_success() {
            return Err(HttpError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        serde_json::from_str(&text)
            .map_err(|e| HttpError::Malformed(format!("invalid JSON body: {e}")))
    }
}

/// Joins an endpoint base URL and an API path without doubling slashes.
pub fn join(endpoint: &str, path: &str) -> String {
    format!(
        "{}/{}",
        endpoint.trim_end_matches('/'),
        path.trim_start_matches('/')
    )
}
