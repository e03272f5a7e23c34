use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use clickadapt::Error as CoreError;

/// Error body: `{"error": "<code>", "message": "..."}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session `{id}`"))
    }

    pub fn unknown_decoder(name: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownDecoder", format!("no decoder `{name}`"))
    }

    pub fn session_finished(id: &str) -> Self {
        Self::new(StatusCode::CONFLICT, "SessionFinished", format!("session `{id}` is finished"))
    }

    pub fn nothing_to_undo(id: &str) -> Self {
        Self::new(StatusCode::CONFLICT, "NothingToUndo", format!("session `{id}` has no clicks"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        match e {
            CoreError::OutOfBounds { .. } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "OutOfBounds", message),
            CoreError::ConflictingClicks { .. } => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "ConflictingClicks", message)
            }
            CoreError::Decode { .. } | CoreError::MalformedEncoding(_) => {
                Self::new(StatusCode::BAD_REQUEST, "DecodeError", message)
            }
            CoreError::Config(_) | CoreError::Parse(_) => Self::new(StatusCode::BAD_REQUEST, "BadRequest", message),
            CoreError::UnknownName(name) => Self::unknown_decoder(&name),
            CoreError::NameCollision(_) => Self::new(StatusCode::CONFLICT, "NameCollision", message),
            _ => Self::internal(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error: self.code,
            message: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
