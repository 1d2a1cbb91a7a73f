//! Versioned JSON document format for networks.
//!
//! The canonical form sorts object keys, keeps `agents` and `edges` in their
//! stored order, and uses two-space indentation with a trailing newline.

use std::fmt;

use serde_json::{Map, Value};

use super::lan::Lan;
use super::validate::{structural_issues, StructureIssue};

pub const DOCUMENT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    /// 1-based line and column in the source text.
    Position { line: usize, column: usize },
    /// JSON path to the offending value, e.g. `agents[0].control.enabled`.
    Path(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Position { line, column } => write!(f, "line {line}, column {column}"),
            Location::Path(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },
    #[error("unsupported document version {found}")]
    SchemaVersion { found: Value },
    #[error("inconsistent network: {}", join_issues(.0))]
    Structure(Vec<StructureIssue>),
}

fn join_issues(issues: &[StructureIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Converts a network into its JSON value, with the version stamp.
pub fn to_value(lan: &Lan) -> Value {
    let mut value = serde_json::to_value(lan).expect("network serializes to JSON");
    if let Value::Object(map) = &mut value {
        map.insert("version".into(), Value::from(DOCUMENT_VERSION));
    }
    canonicalize(value)
}

/// Canonical document text.
pub fn serialize_lan(lan: &Lan) -> String {
    let mut text = serde_json::to_string_pretty(&to_value(lan)).expect("JSON value prints");
    text.push('\n');
    text
}

pub fn deserialize_lan(text: &str) -> Result<Lan, DocumentError> {
    let value: Value = serde_json::from_str(text).map_err(|e| DocumentError::Parse {
        location: Location::Position {
            line: e.line(),
            column: e.column(),
        },
        message: e.to_string(),
    })?;
    from_value(value)
}

pub fn from_value(value: Value) -> Result<Lan, DocumentError> {
    let Value::Object(mut map) = value else {
        return Err(DocumentError::Parse {
            location: Location::Path(".".into()),
            message: "document must be a JSON object".into(),
        });
    };
    match map.remove("version") {
        None => {
            return Err(DocumentError::Parse {
                location: Location::Path("version".into()),
                message: "missing field `version`".into(),
            })
        }
        Some(v) if v.as_u64() == Some(DOCUMENT_VERSION) => {}
        Some(found) => return Err(DocumentError::SchemaVersion { found }),
    }
    let lan: Lan =
        serde_path_to_error::deserialize(Value::Object(map)).map_err(|e| DocumentError::Parse {
            location: Location::Path(e.path().to_string()),
            message: e.inner().to_string(),
        })?;
    let issues = structural_issues(&lan);
    if !issues.is_empty() {
        return Err(DocumentError::Structure(issues));
    }
    Ok(lan)
}

/// Rebuilds every object with its keys in sorted order.
pub fn canonicalize(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, canonicalize(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}
