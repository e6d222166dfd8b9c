use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};
use taxa_core::assist::AssistError;
use taxa_core::compare::CompareError;
use taxa_core::model::ModelError;
use taxa_core::persist::PersistError;
use taxa_core::predict::PredictError;

/// Every failure leaves the service as `{code, message, details}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.to_owned(),
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn no_such_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NoSuchSession", format!("no session {id:?}")).details(json!({ "session_id": id }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "details": self.details });
        (self.status, Json(body)).into_response()
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        let details = match e.path() {
            Some(p) => json!({ "path": p }),
            None => Value::Null,
        };
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()).details(details)
    }
}

impl From<CompareError> for ApiError {
    fn from(e: CompareError) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
    }
}

impl From<AssistError> for ApiError {
    fn from(e: AssistError) -> Self {
        let details = match &e {
            AssistError::MissingEmbedding(uuids) => json!({ "uuids": uuids }),
            _ => Value::Null,
        };
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()).details(details)
    }
}

impl From<PredictError> for ApiError {
    fn from(e: PredictError) -> Self {
        let details = match &e {
            PredictError::MissingEmbedding(uuids) => json!({ "uuids": uuids }),
            _ => Value::Null,
        };
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()).details(details)
    }
}

impl From<PersistError> for ApiError {
    fn from(e: PersistError) -> Self {
        let status = match e {
            PersistError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.code(), e.to_string())
    }
}
