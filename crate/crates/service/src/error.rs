use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

use activediag_core::expectation::ExpectationError;
use activediag_core::harness::HarnessError;
use activediag_core::model::ModelError;
use activediag_core::policies::PolicyError;
use activediag_core::reasoner::ReasonerError;
use activediag_core::wire::ErrorBody;

/// A failed request: HTTP status plus a machine-readable code.
#[derive(Debug, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError { status, code, message: message.into() }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

fn model_code(e: &ModelError) -> (StatusCode, &'static str) {
    match e {
        ModelError::UnknownVariable(_) | ModelError::MissingInput(_) => (StatusCode::BAD_REQUEST, "bad_observation"),
        ModelError::ControlNotInput(_) | ModelError::DuplicateControl(_) | ModelError::NeedsStrongSemantics => {
            (StatusCode::BAD_REQUEST, "invalid_config")
        }
        _ => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_model"),
    }
}

fn expectation_code(e: &ExpectationError) -> (StatusCode, &'static str) {
    match e {
        ExpectationError::Model(m) => model_code(m),
        ExpectationError::BadConfig(_) => (StatusCode::BAD_REQUEST, "invalid_config"),
        ExpectationError::GuardExceeded(_) => (StatusCode::UNPROCESSABLE_ENTITY, "too_large"),
        _ => (StatusCode::UNPROCESSABLE_ENTITY, "expectation_failed"),
    }
}

impl From<HarnessError> for ApiError {
    fn from(e: HarnessError) -> ApiError {
        let (status, code) = match &e {
            HarnessError::Model(m) => model_code(m),
            HarnessError::Term(_) => (StatusCode::BAD_REQUEST, "bad_observation"),
            HarnessError::Reasoner(ReasonerError::NoDiagnosis) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "inconsistent_observation")
            }
            HarnessError::Reasoner(ReasonerError::GuardExceeded(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "too_large"),
            HarnessError::Expectation(x) => expectation_code(x),
            HarnessError::Policy(p) => match p {
                PolicyError::GuardExceeded(..) => (StatusCode::UNPROCESSABLE_ENTITY, "too_large"),
                PolicyError::NoProbe => (StatusCode::CONFLICT, "no_probe"),
                PolicyError::EmptySet => (StatusCode::CONFLICT, "terminal"),
                PolicyError::Expectation(x) => expectation_code(x),
                PolicyError::Model(m) => model_code(m),
            },
            HarnessError::Parse(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_model"),
            HarnessError::Terminal(_) => (StatusCode::CONFLICT, "terminal"),
            HarnessError::SuggestionPending => (StatusCode::CONFLICT, "suggestion_pending"),
            HarnessError::NoPending => (StatusCode::CONFLICT, "no_pending"),
            HarnessError::NotSimulated => (StatusCode::CONFLICT, "not_simulated"),
            HarnessError::Invariant(_) | HarnessError::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            _ => (StatusCode::BAD_REQUEST, "bad_request"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        let body = ErrorBody { code: self.code.to_string(), message: self.message };
        (self.status, Json(body)).into_response()
    }
}
