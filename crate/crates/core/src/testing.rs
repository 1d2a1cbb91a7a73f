//! Test backends that answer from what a prompt already contains.

pub mod poetry;

use serde_json::{json, Value};

use crate::gateway::{Backend, CancelToken, CompletionRequest, CompletionResponse, GatewayError};
use crate::model::{NamedValues, EXTERNAL_INPUT};
use crate::runtime::prompt::{EXTERNAL_LABEL, STEP_BY_STEP};

/// `{"thought": ..., "result": ...}` as a model would write it.
pub fn answer(thought: &str, result: impl Into<Value>) -> String {
    json!({"thought": thought, "result": result.into()}).to_string()
}

fn parse_values(block: &str) -> NamedValues {
    let mut out: Vec<(String, String)> = Vec::new();
    for line in block.lines() {
        if let Some(rest) = line.strip_prefix("(from ") {
            if let Some((label, value)) = rest.split_once(") ") {
                let label = if label == EXTERNAL_LABEL { EXTERNAL_INPUT } else { label };
                out.push((label.to_string(), value.to_string()));
                continue;
            }
        }
        if let Some(last) = out.last_mut() {
            last.1.push('\n');
            last.1.push_str(line);
        }
    }
    let mut values = NamedValues::new();
    for (k, v) in out {
        values.insert(k, v);
    }
    values
}

/// The inputs listed in a control or execution module prompt.
pub fn prompt_inputs(prompt: &str) -> Option<NamedValues> {
    let start = prompt.find("# Inputs\n")? + "# Inputs\n".len();
    let end = prompt[start..].find("\nWhere the inputs come from:")? + start;
    Some(parse_values(&prompt[start..end]))
}

/// The examples listed in a module prompt, as (inputs, rendered result).
pub fn prompt_examples(prompt: &str) -> Vec<(NamedValues, String)> {
    let Some(start) = prompt.find("\n# Examples\n").map(|i| i + "\n# Examples\n".len()) else {
        return Vec::new();
    };
    let end = prompt[start..]
        .find(&format!("\n{STEP_BY_STEP}"))
        .map_or(prompt.len(), |i| i + start);
    let mut chunks: Vec<String> = Vec::new();
    for line in prompt[start..end].lines() {
        if line.starts_with("## Example ") {
            chunks.push(String::new());
        } else if let Some(c) = chunks.last_mut() {
            c.push_str(line);
            c.push('\n');
        }
    }
    chunks
        .into_iter()
        .filter_map(|c| {
            let body = c.strip_prefix("Inputs:\n")?;
            let at = body.find("\nResult: ").map(|i| i + 1).or_else(|| body.starts_with("Result: ").then_some(0))?;
            let inputs = parse_values(&body[..at]);
            let mut result = body[at + "Result: ".len()..].to_string();
            while result.ends_with('\n') {
                result.pop();
            }
            Some((inputs, result))
        })
        .collect()
}

/// The most specific example whose inputs are all present in `inputs`;
/// later examples win ties.
pub fn matching_example<'a>(examples: &'a [(NamedValues, String)], inputs: &NamedValues) -> Option<&'a str> {
    examples
        .iter()
        .filter(|(ex, _)| ex.is_subset_of(inputs))
        .fold(None::<&(NamedValues, String)>, |best, e| match best {
            Some(b) if b.0.len() > e.0.len() => Some(b),
            _ => Some(e),
        })
        .map(|(_, r)| r.as_str())
}

type Fallback = dyn Fn(&CompletionRequest) -> Result<String, GatewayError> + Send + Sync;

/// Answers module prompts by copying the result of the best matching
/// few-shot example, the way a model that respects its examples would.
/// Everything else goes to the fallback.
pub struct ExampleOracle {
    fallback: Box<Fallback>,
}

impl ExampleOracle {
    pub fn new<F>(fallback: F) -> Self
    where
        F: Fn(&CompletionRequest) -> Result<String, GatewayError> + Send + Sync + 'static,
    {
        Self {
            fallback: Box::new(fallback),
        }
    }

    /// Answer from examples alone, if the request is a module prompt with a match.
    pub fn recall(request: &CompletionRequest) -> Option<String> {
        let is_cm = request.tag.starts_with("cm:");
        if !is_cm && !request.tag.starts_with("em:") {
            return None;
        }
        let inputs = prompt_inputs(&request.prompt)?;
        let examples = prompt_examples(&request.prompt);
        let result = matching_example(&examples, &inputs)?;
        let value = if is_cm {
            Value::Bool(result.parse::<bool>().ok()?)
        } else {
            Value::String(result.to_string())
        };
        Some(answer("an earlier example matches these inputs", value))
    }
}

impl Backend for ExampleOracle {
    fn id(&self) -> &str {
        "example-oracle"
    }

    fn complete(&self, request: &CompletionRequest, _cancel: &CancelToken) -> Result<CompletionResponse, GatewayError> {
        let text = match Self::recall(request) {
            Some(t) => t,
            None => (self.fallback)(request)?,
        };
        Ok(CompletionResponse {
            text,
            latency: std::time::Duration::ZERO,
            backend_id: self.id().to_string(),
        })
    }
}
