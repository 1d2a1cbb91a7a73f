//! Strict parsing of JSON answers, with model-assisted reformatting when the
//! raw output does not conform.

use serde_json::{Map, Value};

use super::trace::CallRecord;
use crate::gateway::{CompletionRequest, Gateway, GatewayError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Bool,
    Text,
    /// Any JSON object.
    Object,
    /// Any JSON value.
    Any,
    /// A string equal, after [`normalize_label`], to one of the listed labels.
    OneOf(&'static [&'static str]),
}

/// Lowercases and maps spaces and hyphens to underscores so that labels such
/// as "Lack of agents" and "lack_of_agents" compare equal.
pub fn normalize_label(raw: &str) -> String {
    raw.trim()
        .chars()
        .map(|c| match c {
            ' ' | '-' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    pub required: bool,
    /// How the field is shown in the rendered template.
    pub placeholder: String,
}

/// The JSON shape an answer must have.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSchema {
    pub fields: Vec<FieldSpec>,
}

impl ResponseSchema {
    pub fn new() -> Self {
        Self { fields: Vec::new() }
    }

    pub fn field(mut self, name: &str, kind: FieldKind, placeholder: impl Into<String>) -> Self {
        self.fields.push(FieldSpec {
            name: name.into(),
            kind,
            required: true,
            placeholder: placeholder.into(),
        });
        self
    }

    pub fn optional(mut self, name: &str, kind: FieldKind, placeholder: impl Into<String>) -> Self {
        self.fields.push(FieldSpec {
            name: name.into(),
            kind,
            required: false,
            placeholder: placeholder.into(),
        });
        self
    }

    pub fn has_field(&self, name: &str) -> bool {
        self.fields.iter().any(|f| f.name == name)
    }

    /// Template text shown to the model, one field per line.
    pub fn render(&self) -> String {
        let mut out = String::from("{\n");
        for (i, f) in self.fields.iter().enumerate() {
            let sep = if i + 1 == self.fields.len() { "" } else { "," };
            out.push_str(&format!("  \"{}\": {}{}\n", f.name, f.placeholder, sep));
        }
        out.push('}');
        out
    }

    /// Parses `raw` as a JSON object conforming to the schema. A single
    /// surrounding Markdown code fence is tolerated.
    pub fn parse(&self, raw: &str) -> Result<Map<String, Value>, String> {
        let text = strip_fence(raw.trim());
        let value: Value = serde_json::from_str(text).map_err(|e| format!("not valid JSON: {e}"))?;
        let Value::Object(map) = value else {
            return Err("answer is not a JSON object".into());
        };
        self.check(&map)?;
        Ok(map)
    }

    pub fn check(&self, map: &Map<String, Value>) -> Result<(), String> {
        for f in &self.fields {
            match map.get(&f.name) {
                None | Some(Value::Null) if f.required => {
                    return Err(format!("missing field `{}`", f.name))
                }
                None | Some(Value::Null) => {}
                Some(v) => {
                    let ok = match f.kind {
                        FieldKind::Bool => v.is_boolean(),
                        FieldKind::Text => v.is_string(),
                        FieldKind::Object => v.is_object(),
                        FieldKind::Any => true,
                        FieldKind::OneOf(labels) => match v.as_str() {
                            Some(s) => {
                                if !labels.contains(&normalize_label(s).as_str()) {
                                    return Err(format!(
                                        "field `{}` must be one of: {}",
                                        f.name,
                                        labels.join(", ")
                                    ));
                                }
                                true
                            }
                            None => false,
                        },
                    };
                    if !ok {
                        return Err(format!("field `{}` has the wrong type", f.name));
                    }
                }
            }
        }
        Ok(())
    }
}

impl Default for ResponseSchema {
    fn default() -> Self {
        Self::new()
    }
}

fn strip_fence(text: &str) -> &str {
    let Some(rest) = text.strip_prefix("```") else {
        return text;
    };
    let Some(body) = rest.strip_suffix("```") else {
        return text;
    };
    match body.find('\n') {
        Some(nl) => body[nl + 1..].trim(),
        None => body.trim(),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("no conforming answer after {} attempts: {problem}", .attempts.len())]
pub struct FormatError {
    /// Every raw output that was tried, first the original.
    pub attempts: Vec<String>,
    pub problem: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RepairError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub value: Map<String, Value>,
    /// Raw outputs in the order they were tried.
    pub attempts: Vec<String>,
    pub repair_calls: Vec<CallRecord>,
}

pub fn reformat_prompt(raw: &str, schema: &ResponseSchema) -> String {
    format!(
        "The text below was supposed to be a single JSON object following the template, \
         but it does not conform.\n\n# Text\n{raw}\n\n# Template\n{}\n\n\
         Rewrite the text as one JSON object that follows the template. \
         Reply with only the JSON object and nothing else.",
        schema.render()
    )
}

/// Parses `raw`; on failure asks the model to reformat it, up to `budget`
/// attempts in total (the original output counts as the first).
pub fn parse_or_reformat(
    raw: &str,
    schema: &ResponseSchema,
    gateway: &Gateway,
    budget: u32,
    tag: &str,
) -> Result<Parsed, RepairError> {
    let budget = budget.max(1);
    let mut attempts = vec![raw.to_string()];
    let mut repair_calls = Vec::new();
    let mut current = raw.to_string();
    loop {
        match schema.parse(&current) {
            Ok(value) => {
                return Ok(Parsed {
                    value,
                    attempts,
                    repair_calls,
                })
            }
            Err(problem) => {
                if attempts.len() as u32 >= budget {
                    return Err(FormatError { attempts, problem }.into());
                }
                let request = CompletionRequest::new(reformat_prompt(&current, schema), format!("repair:{tag}"));
                let response = gateway.complete(&request)?;
                repair_calls.push(CallRecord::new(&request, &response.text));
                current = response.text;
                attempts.push(current.clone());
            }
        }
    }
}
