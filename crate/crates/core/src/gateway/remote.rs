use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{Backend, CancelToken, CompletionRequest, CompletionResponse, GatewayError};

pub const ENV_URL: &str = "LANFORGE_LLM_URL";
pub const ENV_KEY: &str = "LANFORGE_LLM_KEY";
pub const ENV_MODEL: &str = "LANFORGE_LLM_MODEL";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Full URL of a chat-completions endpoint.
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub request_timeout: Duration,
    pub retry: RetryPolicy,
}

impl RemoteConfig {
    pub fn from_env() -> Result<Self, GatewayError> {
        let url = std::env::var(ENV_URL)
            .ok()
            .filter(|v| !v.trim().is_empty())
            .ok_or_else(|| GatewayError::Config(format!("{ENV_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL)
            .ok()
            .filter(|v| !v.trim().is_empty())
            .ok_or_else(|| GatewayError::Config(format!("{ENV_MODEL} is not set")))?;
        Ok(Self {
            url,
            api_key: std::env::var(ENV_KEY).ok().filter(|v| !v.is_empty()),
            model,
            request_timeout: Duration::from_secs(600),
            retry: RetryPolicy::default(),
        })
    }
}

/// Exponential backoff for transient failures.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
    pub cap: Duration,
    /// `None` retries until the call succeeds or is cancelled.
    pub max_attempts: Option<u32>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base: Duration::from_secs(1),
            factor: 2,
            cap: Duration::from_secs(60),
            max_attempts: None,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let mut d = self.base;
        for _ in 1..attempt {
            d = d.saturating_mul(self.factor);
            if d >= self.cap {
                return self.cap;
            }
        }
        d.min(self.cap)
    }
}

enum Failure {
    Transient(String),
    Fatal(GatewayError),
}

/// Chat-completions client over HTTP with retry on transport errors, 429 and 5xx.
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    id: String,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.request_timeout))
            .build()
            .into();
        let id = format!("remote:{}", config.model);
        Self { config, agent, id }
    }

    pub fn from_env() -> Result<Self, GatewayError> {
        Ok(Self::new(RemoteConfig::from_env()?))
    }

    fn attempt(&self, request: &CompletionRequest) -> Result<String, Failure> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut req = self.agent.post(&self.config.url);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Transient(format!("reading body: {e}")))?;
        if status == 429 || status >= 500 {
            return Err(Failure::Transient(format!("status {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Failure::Fatal(GatewayError::Provider {
                status,
                message: text,
            }));
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Transient(format!("incomplete response body: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .or_else(|| value["choices"][0]["text"].as_str())
            .map(str::to_string)
            .ok_or_else(|| Failure::Transient("response carries no completion text".into()))
    }
}

impl Backend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(
        &self,
        request: &CompletionRequest,
        cancel: &CancelToken,
    ) -> Result<CompletionResponse, GatewayError> {
        let started = Instant::now();
        let mut attempt = 0u32;
        loop {
            if cancel.is_cancelled() {
                return Err(GatewayError::Aborted);
            }
            attempt += 1;
            match self.attempt(request) {
                Ok(text) => {
                    return Ok(CompletionResponse {
                        text,
                        latency: started.elapsed(),
                        backend_id: self.id.clone(),
                    })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(reason)) => {
                    if let Some(max) = self.config.retry.max_attempts {
                        if attempt >= max {
                            return Err(GatewayError::Provider {
                                status: 0,
                                message: format!("gave up after {attempt} attempts: {reason}"),
                            });
                        }
                    }
                    let delay = self.config.retry.delay(attempt);
                    tracing::warn!(%reason, attempt, ?delay, "transient provider failure, retrying");
                    cancel.sleep(delay)?;
                }
            }
        }
    }
}
