use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;
use wftune_core::TuneError;

/// An error with the HTTP status it maps to.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{status}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no session {id}"))
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    /// Rejected input: bad session spec or unknown index.
    pub fn invalid(e: TuneError) -> Self {
        Self::unprocessable(e.to_string())
    }

    /// Tuner errors: contradictory votes and state conflicts are 409, bad
    /// input 422.
    pub fn from_tuner(e: TuneError) -> Self {
        match e {
            TuneError::OverlappingVotes(_) | TuneError::Precondition(_) | TuneError::Coverage(_) => {
                Self::conflict(e.to_string())
            }
            TuneError::UnknownIndex(_) | TuneError::Config(_) | TuneError::Capacity { .. } => Self::invalid(e),
            other => Self::internal(other),
        }
    }

    pub fn internal(e: TuneError) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}
