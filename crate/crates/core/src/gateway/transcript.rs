use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, CancelToken, CompletionRequest, CompletionResponse, GatewayError};

/// Hex SHA-256 of the exact prompt bytes. Tags are not part of the fingerprint.
pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// One recorded request/response pair; a line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt_sha256: String,
    pub prompt: String,
    pub response: String,
    pub tag: String,
}

/// An ordered log of model exchanges, stored as JSON lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub exchanges: Vec<Exchange>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, request: &CompletionRequest, response: &str) {
        self.exchanges.push(Exchange {
            prompt_sha256: prompt_sha256(&request.prompt),
            prompt: request.prompt.clone(),
            response: response.to_string(),
            tag: request.tag.clone(),
        });
    }

    pub fn len(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exchanges.is_empty()
    }

    /// Hash over the sequence of prompt fingerprints.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.exchanges {
            h.update(e.prompt_sha256.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.exchanges {
            out.push_str(&serde_json::to_string(e).expect("exchange serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses JSON lines, checking that every stored hash matches its prompt.
    pub fn from_jsonl(text: &str) -> Result<Self, GatewayError> {
        let mut exchanges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: Exchange = serde_json::from_str(line)
                .map_err(|err| GatewayError::Transcript(format!("line {}: {err}", i + 1)))?;
            if prompt_sha256(&e.prompt) != e.prompt_sha256 {
                return Err(GatewayError::Transcript(format!(
                    "line {}: prompt_sha256 does not match the stored prompt",
                    i + 1
                )));
            }
            exchanges.push(e);
        }
        Ok(Self { exchanges })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        std::fs::write(path, self.to_jsonl())
            .map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))
    }
}

/// Wraps a backend and appends every successful exchange to a transcript.
pub struct RecordingBackend {
    inner: Arc<dyn Backend>,
    transcript: Mutex<Transcript>,
    id: String,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn Backend>) -> Self {
        let id = format!("record({})", inner.id());
        Self {
            inner,
            transcript: Mutex::new(Transcript::new()),
            id,
        }
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().unwrap().clone()
    }
}

impl Backend for RecordingBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(
        &self,
        request: &CompletionRequest,
        cancel: &CancelToken,
    ) -> Result<CompletionResponse, GatewayError> {
        let response = self.inner.complete(request, cancel)?;
        self.transcript
            .lock()
            .unwrap()
            .push(request, &response.text);
        Ok(response)
    }
}

/// Serves a recorded transcript in order, refusing any prompt that differs
/// from the one recorded at the same position. Never touches the network.
pub struct ReplayBackend {
    transcript: Transcript,
    cursor: Mutex<usize>,
}

impl ReplayBackend {
    pub fn new(transcript: Transcript) -> Self {
        Self {
            transcript,
            cursor: Mutex::new(0),
        }
    }

    pub fn served(&self) -> usize {
        *self.cursor.lock().unwrap()
    }

    pub fn is_finished(&self) -> bool {
        self.served() == self.transcript.len()
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> &str {
        "replay"
    }

    fn complete(
        &self,
        request: &CompletionRequest,
        _cancel: &CancelToken,
    ) -> Result<CompletionResponse, GatewayError> {
        let mut cursor = self.cursor.lock().unwrap();
        let index = *cursor + 1;
        let recorded = self
            .transcript
            .exchanges
            .get(*cursor)
            .ok_or(GatewayError::ReplayExhausted { index })?;
        if prompt_sha256(&request.prompt) != recorded.prompt_sha256 {
            return Err(GatewayError::ReplayMismatch {
                index,
                diff: first_difference(&recorded.prompt, &request.prompt),
            });
        }
        *cursor += 1;
        Ok(CompletionResponse {
            text: recorded.response.clone(),
            latency: Duration::ZERO,
            backend_id: self.id().to_string(),
        })
    }
}

/// Describes the first differing line between the recorded and the actual prompt.
fn first_difference(recorded: &str, actual: &str) -> String {
    let mut rec = recorded.lines();
    let mut act = actual.lines();
    let mut line = 1;
    loop {
        match (rec.next(), act.next()) {
            (Some(a), Some(b)) if a == b => line += 1,
            (None, None) => return "prompts differ only in line endings".into(),
            (a, b) => {
                return format!(
                    "line {line}: recorded {:?}, got {:?}",
                    a.unwrap_or("<end of prompt>"),
                    b.unwrap_or("<end of prompt>")
                )
            }
        }
    }
}
