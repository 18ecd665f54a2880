use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use highrecall_core::{SearchError, SessionError};
use serde::Serialize;

#[derive(Debug)]
pub enum ApiError {
    UnknownCorpus(String),
    BadRequest(String),
    Session(SessionError),
    Internal(String),
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    ids: Option<&'a [String]>,
}

impl ApiError {
    fn parts(&self) -> (StatusCode, &'static str, Option<&[String]>) {
        use SessionError as S;
        match self {
            ApiError::UnknownCorpus(_) => (StatusCode::NOT_FOUND, "unknown_corpus", None),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request", None),
            ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", None),
            ApiError::Session(e) => match e {
                S::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session", None),
                S::PartialLabels(ids) => (StatusCode::UNPROCESSABLE_ENTITY, "partial_labels", Some(ids)),
                S::UnknownIds(ids) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_ids", Some(ids)),
                S::SessionFinished => (StatusCode::CONFLICT, "session_finished", None),
                S::NoSeeds => (StatusCode::UNPROCESSABLE_ENTITY, "no_seeds", None),
                S::Busy => (StatusCode::CONFLICT, "busy", None),
                S::CorruptLog(_) => (StatusCode::INTERNAL_SERVER_ERROR, "corrupt_log", None),
                S::Search(SearchError::InvalidConfig(_)) | S::Search(SearchError::Bandit(_)) => {
                    (StatusCode::BAD_REQUEST, "invalid_config", None)
                }
                S::Search(_) => (StatusCode::INTERNAL_SERVER_ERROR, "search_failed", None),
            },
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ApiError::UnknownCorpus(name) => write!(f, "unknown corpus `{name}`"),
            ApiError::BadRequest(m) | ApiError::Internal(m) => f.write_str(m),
            ApiError::Session(e) => write!(f, "{e}"),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::Session(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, ids) = self.parts();
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        let mut response = (
            status,
            Json(Body {
                error: code,
                message: self.to_string(),
                ids,
            }),
        )
            .into_response();
        if matches!(self, ApiError::Session(SessionError::Busy)) {
            response
                .headers_mut()
                .insert("retry-after", axum::http::HeaderValue::from_static("1"));
        }
        response
    }
}
