//! Uniform access to text-completion backends.
//!
//! Every model call in the engine goes through a [`Gateway`], which validates
//! the request, enforces the prompt-length limit, honours cancellation and
//! counts calls. Backends implement [`Backend`]: [`RemoteBackend`] talks to a
//! chat-completions endpoint, [`ScriptedBackend`] and [`FnBackend`] are
//! deterministic oracles for tests, and [`RecordingBackend`] /
//! [`ReplayBackend`] capture and serve transcripts.

mod remote;
mod scripted;
mod transcript;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use remote::{RemoteBackend, RemoteConfig, RetryPolicy};
pub use scripted::{FnBackend, ScriptedBackend};
pub use transcript::{prompt_sha256, Exchange, RecordingBackend, ReplayBackend, Transcript};

/// Temperature for activation decisions and pipeline steps.
pub const DETERMINISTIC_TEMPERATURE: f32 = 0.0;
/// Temperature for execution-module generation.
pub const GENERATION_TEMPERATURE: f32 = 0.7;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;
/// Prompts longer than this many characters are refused unless configured otherwise.
pub const DEFAULT_MAX_PROMPT_CHARS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f32,
    pub max_tokens: u32,
    /// Free-form label such as `cm:RhymingPolisher` or `step:1`.
    pub tag: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, tag: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: DETERMINISTIC_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            tag: tag.into(),
        }
    }

    pub fn with_temperature(mut self, temperature: f32) -> Self {
        self.temperature = temperature;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResponse {
    pub text: String,
    pub latency: Duration,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("request aborted")]
    Aborted,
    #[error("backend not configured: {0}")]
    Config(String),
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("scripted oracle exhausted after {served} responses (request tag {tag:?})")]
    OracleExhausted { served: usize, tag: String },
    #[error("replay diverged at request {index}: {diff}")]
    ReplayMismatch { index: usize, diff: String },
    #[error("replay transcript exhausted at request {index}")]
    ReplayExhausted { index: usize },
    #[error("prompt of {chars} characters exceeds the limit of {limit}")]
    PromptTooLong { chars: usize, limit: usize },
    #[error("provider rejected the request with status {status}: {message}")]
    Provider { status: u16, message: String },
    #[error("transcript error: {0}")]
    Transcript(String),
}

/// Shared cancellation flag. Cloning shares the flag.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }

    /// Sleeps for `total`, waking early when cancelled.
    pub fn sleep(&self, total: Duration) -> Result<(), GatewayError> {
        let step = Duration::from_millis(20);
        let mut left = total;
        while !left.is_zero() {
            if self.is_cancelled() {
                return Err(GatewayError::Aborted);
            }
            let d = left.min(step);
            std::thread::sleep(d);
            left -= d;
        }
        if self.is_cancelled() {
            return Err(GatewayError::Aborted);
        }
        Ok(())
    }
}

/// A text-completion backend. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn complete(
        &self,
        request: &CompletionRequest,
        cancel: &CancelToken,
    ) -> Result<CompletionResponse, GatewayError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(
        &self,
        request: &CompletionRequest,
        cancel: &CancelToken,
    ) -> Result<CompletionResponse, GatewayError> {
        (**self).complete(request, cancel)
    }
}

/// The front door for all model calls made by one run or pipeline.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    cancel: CancelToken,
    max_prompt_chars: Option<usize>,
    calls: AtomicUsize,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Self {
            backend,
            cancel: CancelToken::new(),
            max_prompt_chars: Some(DEFAULT_MAX_PROMPT_CHARS),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_cancel(mut self, cancel: CancelToken) -> Self {
        self.cancel = cancel;
        self
    }

    /// `None` disables the length check.
    pub fn with_max_prompt_chars(mut self, limit: Option<usize>) -> Self {
        self.max_prompt_chars = limit;
        self
    }

    pub fn cancel_token(&self) -> &CancelToken {
        &self.cancel
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    /// Number of requests handed to the backend so far.
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        if request.prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("prompt is empty".into()));
        }
        if !(0.0..=1.0).contains(&request.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 1]",
                request.temperature
            )));
        }
        if request.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        if let Some(limit) = self.max_prompt_chars {
            let chars = request.prompt.chars().count();
            if chars > limit {
                return Err(GatewayError::PromptTooLong { chars, limit });
            }
        }
        if self.cancel.is_cancelled() {
            return Err(GatewayError::Aborted);
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        tracing::debug!(tag = %request.tag, chars = request.prompt.len(), "completion request");
        let response = self.backend.complete(request, &self.cancel)?;
        if self.cancel.is_cancelled() {
            return Err(GatewayError::Aborted);
        }
        Ok(response)
    }
}
