use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use blockbench_core::store::{SessionStoreError, StoreError};
use blockbench_core::{ApplyError, ResolveError, SessionError};
use serde::Serialize;
use serde_json::{json, Value};

/// Error body of every failed request.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(serialize_with = "status_code")]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

fn status_code<S: serde::Serializer>(s: &StatusCode, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_u16(s.as_u16())
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), details: None }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn conflict(base: u64, current: u64, message: String) -> Self {
        ApiError::new(StatusCode::CONFLICT, "version-conflict", message)
            .with_details(json!({ "baseVersion": base, "currentVersion": current }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<ResolveError> for ApiError {
    fn from(e: ResolveError) -> Self {
        match e {
            ResolveError::UnknownBlock(_) => ApiError::not_found("unknown-block", e.to_string()),
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unresolvable-block", e.to_string()),
        }
    }
}

impl From<ApplyError> for ApiError {
    fn from(e: ApplyError) -> Self {
        let message = e.to_string();
        match e {
            ApplyError::VersionConflict { base, current } => ApiError::conflict(base, current, message),
            ApplyError::Binding(b) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "binding", message)
                .with_details(json!({ "element": b.element() })),
            ApplyError::BlockingEdges { edges, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "blocking-edges", message)
                    .with_details(json!({ "edges": edges }))
            }
            ApplyError::Referenced { referrers, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "referenced", message)
                    .with_details(json!({ "referrers": referrers }))
            }
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-change", message),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::InvalidId(_) => ApiError::bad_request(message),
            StoreError::NotFound(_) => ApiError::not_found("unknown-model", message),
            StoreError::Exists(_) => ApiError::new(StatusCode::CONFLICT, "model-exists", message),
            StoreError::Conflict { base, current } => ApiError::conflict(base, current, message),
            StoreError::Apply(a) => a.into(),
            StoreError::Binding(b) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "binding", message)
                .with_details(json!({ "element": b.element() })),
            StoreError::Load(blockbench_core::store::LoadError::Parse { errors, .. }) => {
                ApiError::internal(message).with_details(json!({ "parseErrors": errors }))
            }
            StoreError::Load(_) | StoreError::Io { .. } => ApiError::internal(message),
        }
    }
}

impl From<SessionStoreError> for ApiError {
    fn from(e: SessionStoreError) -> Self {
        match e {
            SessionStoreError::NotFound(_) => ApiError::not_found("unknown-session", e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::UnknownSession(_) => ApiError::not_found("unknown-session", message),
            SessionError::StaleModel { requested, current, .. } => {
                ApiError::new(StatusCode::CONFLICT, "stale-model", message)
                    .with_details(json!({ "requestedVersion": requested, "currentVersion": current }))
            }
            SessionError::Finished => ApiError::new(StatusCode::CONFLICT, "session-finished", message),
            SessionError::EmptyMethod(_) | SessionError::UnknownStep { .. } | SessionError::WrongModel { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "session", message)
            }
        }
    }
}
