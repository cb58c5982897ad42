use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use pawshake::protocol::ProtocolError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} already exists")]
    SessionExists(String),
    #[error("session limit of {0} reached")]
    TooManySessions(usize),
    #[error("no query is pending")]
    NoPendingQuery,
    #[error("{0}")]
    WrongPhase(String),
    #[error("query {0} has already been answered")]
    DuplicatePost(String),
    #[error("query {0} is not the pending query")]
    UnknownQuery(String),
    #[error("selection must be \"left\" or \"right\", got {0:?}")]
    InvalidSelection(String),
    #[error("rating must be happy, neutral or displeased, got {0:?}")]
    UnknownRating(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("session is not finished")]
    NotFinished,
    #[error("storage: {0}")]
    Storage(String),
    #[error("{0}")]
    Internal(String),
}

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::SessionExists(_) => "session_exists",
            ServiceError::TooManySessions(_) => "too_many_sessions",
            ServiceError::NoPendingQuery => "no_pending_query",
            ServiceError::WrongPhase(_) => "wrong_phase",
            ServiceError::DuplicatePost(_) => "duplicate_post",
            ServiceError::UnknownQuery(_) => "unknown_query",
            ServiceError::InvalidSelection(_) => "invalid_selection",
            ServiceError::UnknownRating(_) => "unknown_rating",
            ServiceError::InvalidConfig(_) => "invalid_config",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::NotFinished => "not_finished",
            ServiceError::Storage(_) => "storage",
            ServiceError::Internal(_) => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::SessionExists(_)
            | ServiceError::NoPendingQuery
            | ServiceError::WrongPhase(_)
            | ServiceError::DuplicatePost(_)
            | ServiceError::UnknownQuery(_)
            | ServiceError::NotFinished => StatusCode::CONFLICT,
            ServiceError::TooManySessions(_) => StatusCode::TOO_MANY_REQUESTS,
            ServiceError::InvalidSelection(_) | ServiceError::UnknownRating(_) | ServiceError::InvalidConfig(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Storage(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<ProtocolError> for ServiceError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::ConfigInvalid(m) => ServiceError::InvalidConfig(m),
            ProtocolError::NoPendingQuery => ServiceError::NoPendingQuery,
            ProtocolError::DuplicatePost(q) => ServiceError::DuplicatePost(q),
            ProtocolError::UnknownQuery(q) => ServiceError::UnknownQuery(q),
            e @ ProtocolError::WrongPhase { .. } => ServiceError::WrongPhase(e.to_string()),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code().to_string(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}
