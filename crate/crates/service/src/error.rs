use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>, detail: Value) -> ApiError {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                detail,
            },
        }
    }

    pub fn not_found(kind: &str, id: &str) -> ApiError {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no {kind} with id `{id}`"),
            json!({ "kind": kind, "id": id }),
        )
    }

    pub fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message, Value::Null)
    }

    pub fn unprocessable(code: &str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message, Value::Null)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::CONFLICT, code, message, Value::Null)
    }

    pub fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message, Value::Null)
    }
}

impl From<predex::Error> for ApiError {
    fn from(e: predex::Error) -> ApiError {
        use predex::Error as E;
        let message = e.to_string();
        let (status, code, detail) = match &e {
            E::Syntax { position, .. } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "syntax_error",
                json!({ "position": position }),
            ),
            E::UnknownFeature(f) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "unknown_feature",
                json!({ "feature": f }),
            ),
            E::KindMismatch { feature, .. } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "kind_mismatch",
                json!({ "feature": feature }),
            ),
            E::Algebra(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_predicate", Value::Null),
            E::EmptyInput | E::Schema(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_data", Value::Null),
            E::Parse { row, column, .. } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_data",
                json!({ "row": row, "column": column }),
            ),
            E::Import { row, .. } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_scores",
                json!({ "row": row }),
            ),
            E::LengthMismatch { expected, actual } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_scores",
                json!({ "expected": expected, "actual": actual }),
            ),
            E::Config(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", Value::Null),
            E::UndefinedInfluence(_) => (StatusCode::UNPROCESSABLE_ENTITY, "undefined_influence", Value::Null),
            E::InsufficientData(_) => (StatusCode::UNPROCESSABLE_ENTITY, "insufficient_data", Value::Null),
            E::NoExplanation => (StatusCode::UNPROCESSABLE_ENTITY, "no_explanation", Value::Null),
            E::Usage(_) => (StatusCode::BAD_REQUEST, "bad_request", Value::Null),
            E::Numerical { residual } => (
                StatusCode::INTERNAL_SERVER_ERROR,
                "numerical",
                json!({ "residual": residual.to_string() }),
            ),
            E::Io(_) | E::Json(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", Value::Null),
        };
        ApiError::new(status, code, message, detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
