use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qsched_core::JobId;
use serde::Deserialize;
use serde_json::json;

use crate::service::{ApiError, Service, SubmitRequest};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/circuits", post(submit))
        .route("/results/{job_id}", get(result))
        .route("/queue", get(queue))
        .route("/backends", get(backends))
        .with_state(service)
}

// The body is parsed by hand so malformed JSON gets the same error shape
// as every other rejection.
async fn submit(State(svc): State<Service>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: SubmitRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(400, "invalid_request", e.to_string())
            .with_detail(json!({ "line": e.line(), "column": e.column() }))
    })?;
    let job_id = svc.submit(req)?;
    Ok((StatusCode::CREATED, Json(json!({ "job_id": job_id }))))
}

#[derive(Debug, Deserialize)]
struct ResultQuery {
    shots: Option<String>,
}

async fn result(
    State(svc): State<Service>,
    Path(job_id): Path<String>,
    Query(q): Query<ResultQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let downsample = match q.shots.as_deref() {
        None | Some("composed") => false,
        Some("requested") => true,
        Some(other) => {
            return Err(ApiError::new(
                400,
                "invalid_request",
                format!("shots must be `requested` or `composed`, got `{other}`"),
            ))
        }
    };
    Ok(Json(svc.job_view(&JobId::from(job_id), downsample)?))
}

async fn queue(State(svc): State<Service>) -> impl IntoResponse {
    Json(json!({ "capacity": svc.capacity(), "jobs": svc.queue() }))
}

async fn backends(State(svc): State<Service>) -> impl IntoResponse {
    Json(svc.backends())
}
