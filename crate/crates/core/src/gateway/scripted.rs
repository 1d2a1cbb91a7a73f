use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use super::{Backend, CancelToken, CompletionRequest, CompletionResponse, GatewayError};

/// Serves pre-written completions in order, whatever the prompt.
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
    seen: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn push(&self, response: impl Into<String>) {
        self.queue.lock().unwrap().push_back(response.into());
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }

    /// Every request served so far, in order.
    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(
        &self,
        request: &CompletionRequest,
        _cancel: &CancelToken,
    ) -> Result<CompletionResponse, GatewayError> {
        let mut seen = self.seen.lock().unwrap();
        let text = self
            .queue
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| GatewayError::OracleExhausted {
                served: seen.len(),
                tag: request.tag.clone(),
            })?;
        seen.push(request.clone());
        Ok(CompletionResponse {
            text,
            latency: Duration::ZERO,
            backend_id: self.id().to_string(),
        })
    }
}

type Responder = dyn Fn(&CompletionRequest) -> Result<String, GatewayError> + Send + Sync;

/// Answers each request by calling a function of the request.
pub struct FnBackend {
    id: String,
    respond: Box<Responder>,
}

impl FnBackend {
    pub fn new<F>(id: impl Into<String>, respond: F) -> Self
    where
        F: Fn(&CompletionRequest) -> Result<String, GatewayError> + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            respond: Box::new(respond),
        }
    }
}

impl Backend for FnBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(
        &self,
        request: &CompletionRequest,
        _cancel: &CancelToken,
    ) -> Result<CompletionResponse, GatewayError> {
        Ok(CompletionResponse {
            text: (self.respond)(request)?,
            latency: Duration::ZERO,
            backend_id: self.id.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_queue_is_exhausted() {
        let b = ScriptedBackend::new(Vec::<String>::new());
        let err = b
            .complete(&CompletionRequest::new("p", "step:1"), &CancelToken::new())
            .unwrap_err();
        assert_eq!(
            err,
            GatewayError::OracleExhausted {
                served: 0,
                tag: "step:1".into()
            }
        );
    }

    #[test]
    fn same_script_same_answers() {
        let run = || {
            let b = ScriptedBackend::new(["a", "b", "c"]);
            (0..3)
                .map(|i| {
                    b.complete(&CompletionRequest::new(format!("p{i}"), "t"), &CancelToken::new())
                        .unwrap()
                        .text
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
        assert_eq!(run(), vec!["a", "b", "c"]);
    }
}
