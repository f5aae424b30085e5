//! HTTP job service: mask previews, generation jobs, job status and image
//! retrieval.
//!
//! Jobs go through a bounded FIFO queue drained by a single worker, so
//! `denoise` calls on one backend instance never overlap.

pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lgtm_core::{generate, make_light_mask, GenerationRequest};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;
use tower_http::cors::{Any, CorsLayer};

use crate::formats::{mask_png, rgb_png};
use crate::registry::SharedBackend;
use crate::spec_json;
use store::{Job, JobState, JobStore};

pub const DEFAULT_QUEUE_CAPACITY: usize = 32;
pub const MAX_PREVIEW_PIXELS: usize = 2048 * 2048;

pub struct ServiceConfig {
    pub store_dir: PathBuf,
    pub queue_capacity: usize,
    pub backend: SharedBackend,
    /// `None` allows any origin.
    pub cors_origin: Option<String>,
}

impl ServiceConfig {
    pub fn new(store_dir: impl Into<PathBuf>, backend: SharedBackend) -> Self {
        Self { store_dir: store_dir.into(), queue_capacity: DEFAULT_QUEUE_CAPACITY, backend, cors_origin: None }
    }
}

#[derive(Clone)]
struct AppState {
    store: Arc<JobStore>,
    queue: mpsc::Sender<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl ToString) -> Self {
        Self { status, code, message: message.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: self.code.to_owned(), message: self.message };
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobView {
    pub id: String,
    pub state: JobState,
    pub request: GenerationRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_at_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at_ms: Option<u64>,
}

impl From<Job> for JobView {
    fn from(job: Job) -> Self {
        Self {
            result: job.image.map(|id| format!("/v1/images/{id}")),
            id: job.id,
            state: job.state,
            request: job.request,
            error: job.error,
            created_at_ms: job.created_at_ms,
            started_at_ms: job.started_at_ms,
            finished_at_ms: job.finished_at_ms,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Accepted {
    pub job_id: String,
}

/// Builds the router and spawns the queue worker on the current runtime.
pub fn start(config: ServiceConfig) -> crate::Result<Router> {
    let store = Arc::new(JobStore::open(&config.store_dir)?);
    let backlog = store.queued_in_order();
    let capacity = config.queue_capacity.max(1).max(backlog.len());
    let (tx, rx) = mpsc::channel(capacity);
    for id in backlog {
        tx.try_send(id).expect("capacity covers the recovered backlog");
    }
    tokio::spawn(worker(Arc::clone(&store), config.backend, rx));

    let cors = match config.cors_origin {
        Some(origin) => {
            let origin = HeaderValue::from_str(&origin)
                .map_err(|_| crate::Error::Format(format!("invalid CORS origin {origin:?}")))?;
            CorsLayer::new().allow_origin(origin)
        }
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);

    Ok(Router::new()
        .route("/v1/mask/preview", post(mask_preview))
        .route("/v1/generate", post(submit))
        .route("/v1/jobs/{id}", get(job_status))
        .route("/v1/images/{id}", get(image))
        .layer(cors)
        .with_state(AppState { store, queue: tx }))
}

pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> crate::Result<()> {
    let app = start(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| crate::Error::io("listen", e))?;
    tracing::info!(%addr, "serving");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| crate::Error::io("serve", e))
}

async fn worker(store: Arc<JobStore>, backend: SharedBackend, mut rx: mpsc::Receiver<String>) {
    while let Some(id) = rx.recv().await {
        let job = match store.mark_running(&id) {
            Ok(job) => job,
            Err(e) => {
                tracing::warn!(job = %id, error = %e, "skipping job");
                continue;
            }
        };
        let backend = Arc::clone(&backend);
        let outcome = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, String> {
            let image = generate(&job.request, &backend).map_err(|e| e.to_string())?;
            rgb_png::encode(&image.image).map_err(|e| e.to_string())
        })
        .await
        .unwrap_or_else(|e| Err(format!("worker panicked: {e}")));
        let recorded = match outcome {
            Ok(png) => store.complete(&id, &png),
            Err(message) => store.fail(&id, message),
        };
        if let Err(e) = recorded {
            tracing::error!(job = %id, error = %e, "failed to record job outcome");
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewBody {
    light: serde_json::Value,
    width: usize,
    height: usize,
}

fn png_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn mask_preview(body: Bytes) -> Result<Response, ApiError> {
    let body: PreviewBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e))?;
    let spec = spec_json::from_value(body.light, true)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_spec", e))?;
    if body.width.saturating_mul(body.height) > MAX_PREVIEW_PIXELS {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "size_too_large",
            format!("{}x{} exceeds 2048x2048 pixels", body.width, body.height),
        ));
    }
    let mask = make_light_mask(&spec, body.width, body.height)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_size", e))?;
    let png = mask_png::encode(&mask).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))?;
    Ok(png_response(png))
}

async fn submit(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: GenerationRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e))?;
    request
        .validate()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e))?;
    let permit = state
        .queue
        .try_reserve()
        .map_err(|_| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "queue_full", "job queue is at capacity"))?;
    let job = state
        .store
        .create(request)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))?;
    permit.send(job.id.clone());
    Ok((StatusCode::ACCEPTED, Json(Accepted { job_id: job.id })).into_response())
}

async fn job_status(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<JobView>, ApiError> {
    state
        .store
        .get(&id)
        .map(|job| Json(job.into()))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no job {id}")))
}

async fn image(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match state.store.image(&id) {
        Ok(Some(bytes)) => Ok(png_response(bytes)),
        Ok(None) => Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no image {id}"))),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e)),
    }
}
