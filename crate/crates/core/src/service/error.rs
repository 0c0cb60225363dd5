use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use crate::domain::{CorpusError, DomainError};
use crate::llm::GatewayError;
use crate::protocol::ProtocolError;
use crate::refine::RefineError;

/// An error response: status, a stable code, and a human message.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub line: Option<usize>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            line: None,
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "SessionBusy", "a run is already in flight for this session")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        if let Some(line) = self.line {
            body["line"] = json!(line);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        let code = match e {
            CorpusError::EmptyCorpus => "EmptyCorpus",
            CorpusError::Malformed { .. } => "MalformedCorpus",
            _ => "InvalidCorpus",
        };
        Self {
            line: e.line(),
            ..Self::bad_request(code, e.to_string())
        }
    }
}

fn gateway_unavailable(e: &GatewayError) -> bool {
    matches!(
        e,
        GatewayError::BackendUnavailable { .. } | GatewayError::ScriptExhausted(_) | GatewayError::Config(_)
    )
}

impl From<ProtocolError> for ApiError {
    fn from(e: ProtocolError) -> Self {
        let message = e.to_string();
        match &e {
            _ if e.is_unknown_node() => Self::not_found("UnknownNode", message),
            ProtocolError::Domain(DomainError::EmptyQuestion) => Self::bad_request("EmptyQuestion", message),
            ProtocolError::Domain(DomainError::EmptyFeedback) => Self::bad_request("EmptyFeedback", message),
            ProtocolError::Domain(_) | ProtocolError::CorpusInvalid(_) => Self::bad_request("InvalidRequest", message),
            ProtocolError::StageMismatch { .. } | ProtocolError::Trace(_) => {
                Self::new(StatusCode::CONFLICT, "StageMismatch", message)
            }
            ProtocolError::EmptyCandidates => Self::bad_request("EmptyCandidates", message),
            ProtocolError::Scoring(RefineError::Gateway(g)) if gateway_unavailable(g) => {
                Self::new(StatusCode::SERVICE_UNAVAILABLE, "ScoringUnavailable", message)
            }
            ProtocolError::CorruptSession(_) => Self::internal(message).with_code("CorruptSession"),
            _ => Self::new(StatusCode::BAD_GATEWAY, "EngineFailed", message),
        }
    }
}

impl ApiError {
    fn with_code(mut self, code: &'static str) -> Self {
        self.code = code;
        self
    }
}
