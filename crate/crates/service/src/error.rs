use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use lanforge_core::model::{DocumentError, StructureIssue, Violation};
use lanforge_core::runtime::RuntimeError;
use lanforge_core::update::PipelineError;

use crate::store::StorageError;
use crate::API_VERSION;

/// An error response: `{api_version, code, message, violations}`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub violations: Vec<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
            violations: Vec::new(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn invalid_lan(violations: &[Violation]) -> Self {
        let message = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        Self {
            violations: violations.iter().map(|v| serde_json::to_value(v).expect("serializes")).collect(),
            ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "lan_invalid", message)
        }
    }

    pub fn malformed_lan(issues: &[StructureIssue]) -> Self {
        let message = issues.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        Self {
            violations: issues.iter().map(|v| serde_json::to_value(v).expect("serializes")).collect(),
            ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "lan_malformed", message)
        }
    }

    pub fn body(&self) -> Value {
        json!({
            "api_version": API_VERSION,
            "code": self.code,
            "message": self.message,
            "violations": self.violations,
        })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

impl From<StorageError> for ApiError {
    fn from(e: StorageError) -> Self {
        tracing::error!(error = %e, "storage failure");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())
    }
}

impl From<DocumentError> for ApiError {
    fn from(e: DocumentError) -> Self {
        match e {
            DocumentError::Structure(issues) => Self::malformed_lan(&issues),
            other => Self::new(StatusCode::BAD_REQUEST, "bad_document", other.to_string()),
        }
    }
}

impl From<RuntimeError> for ApiError {
    fn from(e: RuntimeError) -> Self {
        match e {
            RuntimeError::InvalidLan(v) => Self::invalid_lan(&v),
            RuntimeError::Aborted { .. } => Self::new(StatusCode::CONFLICT, "cancelled", e.to_string()),
            other => Self::new(StatusCode::BAD_GATEWAY, "backend_failed", other.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Conflict(m) => Self::conflict("conflict", m),
            PipelineError::Merge(m) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_intervention", m.to_string()),
            PipelineError::Runtime(r) => r.into(),
            PipelineError::Step(s) => Self::new(StatusCode::BAD_GATEWAY, "step_failed", s.to_string()),
            PipelineError::Example(x) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_example", x.to_string()),
        }
    }
}
