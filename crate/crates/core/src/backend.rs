//! Generation backends. The mock backend is fully offline and deterministic;
//! the remote backend speaks JSON-over-HTTP chat completion (`model`,
//! `messages` with system+user roles, `temperature: 0`) against a
//! configurable base URL.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};

/// Environment variable holding the bearer token for remote backends.
pub const AUTH_TOKEN_ENV: &str = "CKMRAG_API_KEY";

const BACKOFF_BASE_MS: u64 = 100;
const BACKOFF_CAP_MS: u64 = 2_000;

/// Anything that can answer a (system, user) prompt pair with text. Fixture
/// implementations make every remote code path testable offline.
pub trait ChatClient {
    fn complete(&self, system: &str, user: &str) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_s: u64,
    pub max_retries: u32,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: String::new(),
            model: "gpt-3.5-turbo".to_string(),
            timeout_s: 30,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenerationBackend {
    Mock,
    Remote(RemoteConfig),
}

/// Blocking HTTP chat-completion client with retry and exponential backoff
/// on transport failures and 5xx responses. Safe to share across threads;
/// the only mutable state is the request counter.
pub struct HttpChatClient {
    cfg: RemoteConfig,
    http: reqwest::blocking::Client,
    requests: std::sync::atomic::AtomicU64,
}

impl HttpChatClient {
    pub fn new(cfg: RemoteConfig) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_s))
            .build()
            .map_err(|e| Error::Backend(format!("failed to build http client: {e}")))?;
        Ok(HttpChatClient {
            cfg,
            http,
            requests: std::sync::atomic::AtomicU64::new(0),
        })
    }

    /// Requests sent so far, retries included.
    pub fn requests_sent(&self) -> u64 {
        self.requests.load(std::sync::atomic::Ordering::Relaxed)
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.cfg.base_url.trim_end_matches('/')
        )
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, system: &str, user: &str) -> Result<String> {
        let body = json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": 0,
        });

        let mut attempt = 0u32;
        loop {
            let mut request = self.http.post(self.endpoint()).json(&body);
            if let Ok(token) = std::env::var(AUTH_TOKEN_ENV) {
                if !token.is_empty() {
                    request = request.bearer_auth(token);
                }
            }
            self.requests
                .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            let outcome = request.send();
            let retryable = match &outcome {
                Err(_) => true,
                Ok(resp) => resp.status().is_server_error(),
            };
            if retryable && attempt < self.cfg.max_retries {
                let backoff = (BACKOFF_BASE_MS << attempt).min(BACKOFF_CAP_MS);
                std::thread::sleep(Duration::from_millis(backoff));
                attempt += 1;
                continue;
            }
            let resp = outcome.map_err(|e| {
                Error::Backend(format!("transport failure after {} attempt(s): {e}", attempt + 1))
            })?;
            let status = resp.status();
            let text = resp
                .text()
                .map_err(|e| Error::Backend(format!("failed to read response body: {e}")))?;
            if !status.is_success() {
                return Err(Error::Backend(format!("http {status}: {text}")));
            }
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Backend(format!("response is not valid JSON: {e}")))?;
            let content = value
                .pointer("/choices/0/message/content")
                .and_then(|v| v.as_str())
                .ok_or_else(|| {
                    Error::Backend("response JSON is missing choices[0].message.content".to_string())
                })?;
            return Ok(content.to_string());
        }
    }
}
