//! Session-oriented HTTP/JSON service over the diagnosis loop.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | GET | `/models` | | model catalog |
//! | POST | `/sessions` | `CreateSession` | `Created` (201) |
//! | GET | `/sessions/{id}` | | `Snapshot` |
//! | POST | `/sessions/{id}/suggest` | | `SuggestionView` |
//! | POST | `/sessions/{id}/observe` | `ObserveRequest` | `Observed` |
//! | GET | `/sessions/{id}/trace.csv` | | trace CSV |
//!
//! Failures are 4xx/5xx with an `ErrorBody { code, message }`.

mod catalog;
mod error;
mod store;

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;

use activediag_core::wire::{CreateSession, ModelInfo, ObserveRequest};

pub use catalog::Catalog;
pub use error::ApiError;
pub use store::Store;

pub type AppState = Arc<Store>;

pub fn router(store: AppState) -> Router {
    Router::new()
        .route("/models", get(models))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(snapshot))
        .route("/sessions/{id}/suggest", post(suggest))
        .route("/sessions/{id}/observe", post(observe))
        .route("/sessions/{id}/trace.csv", get(trace))
        .with_state(store)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, store: AppState) -> std::io::Result<()> {
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}

/// Runs store work off the async workers; one session's calls serialize on
/// its lock.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::bad_request("bad_request", e.body_text()))
}

async fn models(State(store): State<AppState>) -> Json<Vec<ModelInfo>> {
    Json(store.catalog().describe())
}

async fn create(
    State(store): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(payload)?;
    let created = blocking(move || store.create(&req)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn snapshot(State(store): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(move || store.snapshot(&id)).await?))
}

async fn suggest(State(store): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(move || store.suggest(&id)).await?))
}

async fn observe(
    State(store): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<ObserveRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(payload)?;
    Ok(Json(blocking(move || store.observe(&id, &req)).await?))
}

async fn trace(State(store): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let csv = blocking(move || store.trace_csv(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv))
}
