use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use expdb_core::registry::RegistryError;
use serde_json::{json, Value};

/// A failed request, rendered as `{"error": {"code", "message", "details"}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn body(&self) -> Value {
        json!({"error": {"code": self.code, "message": self.message, "details": self.details}})
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        (self.status, Json(self.body())).into_response()
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        use RegistryError::*;
        let message = e.to_string();
        let (status, code, details) = match e {
            UnknownDataset(id) => (StatusCode::NOT_FOUND, "unknown_dataset", json!({"id": id})),
            UnknownTask(id) => (StatusCode::NOT_FOUND, "unknown_task", json!({"id": id})),
            UnknownFlow(id) => (StatusCode::NOT_FOUND, "unknown_flow", json!({"id": id})),
            UnknownRun(id) => (StatusCode::NOT_FOUND, "unknown_run", json!({"id": id})),
            UnknownChallenge(id) => (StatusCode::NOT_FOUND, "unknown_challenge", json!({"id": id})),
            UnknownMeasure(m) => (StatusCode::BAD_REQUEST, "unknown_measure", json!({"measure": m})),
            UnknownParameter(p) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "unknown_parameter",
                json!({"name": p}),
            ),
            UnknownAttribute(a) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "unknown_attribute",
                json!({"name": a}),
            ),
            ParseFailed(_) => (StatusCode::BAD_REQUEST, "parse_failed", Value::Null),
            DuplicateParameter(p) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "duplicate_parameter",
                json!({"name": p}),
            ),
            InvalidParameterValue { name, value } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_parameter_value",
                json!({"name": name, "value": value}),
            ),
            InvalidInput(_) => (StatusCode::BAD_REQUEST, "invalid_input", Value::Null),
            Conflict(_) => (StatusCode::CONFLICT, "conflict", Value::Null),
            ValidationFailed(v) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "validation_failed",
                json!({"violations": v, "messages": v.iter().map(ToString::to_string).collect::<Vec<_>>()}),
            ),
            Task(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_task", Value::Null),
            EmptyChallenge => (StatusCode::BAD_REQUEST, "empty_challenge", Value::Null),
            TaskNotInChallenge { challenge, task } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "task_not_in_challenge",
                json!({"challenge_id": challenge, "task_id": task}),
            ),
            Integrity(_) => (StatusCode::INTERNAL_SERVER_ERROR, "integrity_error", Value::Null),
            Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io_error", Value::Null),
        };
        ApiError::new(status, code, message).with_details(details)
    }
}
