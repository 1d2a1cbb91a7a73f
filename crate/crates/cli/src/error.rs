use std::path::PathBuf;

use serde_json::{json, Value};

use lanforge_core::gateway::GatewayError;
use lanforge_core::model::Violation;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{} violation(s)", .0.len())]
    Invalid(Vec<Violation>),
    #[error("{code} ({status}): {message}")]
    Api {
        status: u16,
        code: String,
        message: String,
        violations: Vec<Value>,
    },
    #[error("cannot reach {url}: {message}")]
    Unreachable { url: String, message: String },
    #[error("local store: {0}")]
    Store(String),
    #[error(transparent)]
    Backend(#[from] GatewayError),
    #[error("{failed} of {total} example(s) were not learned")]
    Untrained { failed: usize, total: usize },
}

impl CliError {
    pub fn input(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Input {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Api { status: 422, code, .. } if code == "lan_invalid" => 1,
            CliError::Usage(_) | CliError::Input { .. } => 2,
            CliError::Api { status: 404, .. } => 6,
            CliError::Api { status: 409, .. } => 5,
            CliError::Api { status: 502, .. } | CliError::Backend(_) => 4,
            CliError::Api { status, .. } if *status >= 500 => 3,
            CliError::Api { .. } => 2,
            CliError::Unreachable { .. } | CliError::Store(_) => 3,
            CliError::Untrained { .. } => 7,
        }
    }

    pub fn to_json(&self) -> Value {
        let (code, violations) = match self {
            CliError::Usage(_) => ("usage".to_string(), vec![]),
            CliError::Input { .. } => ("bad_input".into(), vec![]),
            CliError::Invalid(v) => ("lan_invalid".into(), v.iter().map(violation_json).collect()),
            CliError::Api { code, violations, .. } => (code.clone(), violations.clone()),
            CliError::Unreachable { .. } => ("unreachable".into(), vec![]),
            CliError::Store(_) => ("storage".into(), vec![]),
            CliError::Backend(_) => ("backend_failed".into(), vec![]),
            CliError::Untrained { .. } => ("untrained".into(), vec![]),
        };
        json!({"error": {"code": code, "message": self.to_string(), "exit_code": self.exit_code(), "violations": violations}})
    }
}

pub fn violation_json(v: &Violation) -> Value {
    let mut value = serde_json::to_value(v).unwrap_or(Value::Null);
    if let Value::Object(map) = &mut value {
        map.insert("message".into(), Value::String(v.to_string()));
    }
    value
}
