//! HTTP session service for interactive tuning: upload an image once, then
//! iterate segmentation parameters and segment selections against it.
//!
//! | Method | Path | Body | Success |
//! |---|---|---|---|
//! | POST | `/sessions` | raw image bytes | 201 `{id, width, height}` |
//! | POST | `/sessions/{id}/segment` | `{method, n, kappa1, kappa2}` | 200 thresholds, preview, mssim |
//! | POST | `/sessions/{id}/extract` | `{segments, fill}` | 200 mask, extracted, edges previews |
//! | GET | `/sessions/{id}/histograms` | | 200 `{original, segmented?}` |
//! | GET | `/sessions/{id}/history` | | 200 list of past segment steps |
//! | GET | `/sessions/{id}/artifacts/{name}` | | 200 full-resolution file |
//! | DELETE | `/sessions/{id}` | | 204 |

pub mod config;
pub mod error;
pub mod session;

use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use histoseg::analysis::CannyParams;
use histoseg::{Fill, SegmentParams, SegmentSelection};
use serde::{Deserialize, Serialize};

pub use config::ServiceConfig;
pub use error::{ApiError, ConfigError};
use session::{HistoryStep, Session, SessionStore};

#[derive(Debug, Clone)]
pub struct AppState {
    pub config: Arc<ServiceConfig>,
    pub sessions: Arc<SessionStore>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            config: Arc::new(config),
            sessions: Arc::new(SessionStore::default()),
        }
    }

    fn session(&self, id: &str) -> Result<Arc<std::sync::Mutex<Session>>, ApiError> {
        self.sessions.get(id).ok_or_else(|| ApiError::not_found("session"))
    }
}

#[derive(Debug, Serialize)]
struct Created {
    id: String,
    width: usize,
    height: usize,
}

/// Body of the extract request. `canny` defaults to the CLI defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractRequest {
    pub segments: Vec<usize>,
    #[serde(default = "default_fill")]
    pub fill: Fill,
    #[serde(default)]
    pub canny: Option<CannyParams>,
}

fn default_fill() -> Fill {
    Fill::Black
}

/// Runs `f` against the locked session on the blocking pool.
async fn with_session<T, F>(state: &AppState, id: &str, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
{
    let shared = state.session(id)?;
    tokio::task::spawn_blocking(move || {
        let mut guard = shared
            .lock()
            .map_err(|_| ApiError::internal("session state poisoned"))?;
        f(&mut guard)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let session = tokio::task::spawn_blocking(move || Session::create(&body))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| match e.status {
            StatusCode::INTERNAL_SERVER_ERROR => e,
            _ => ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, e.message),
        })?;
    let (width, height) = (session.width(), session.height());
    let id = state.sessions.insert(session);
    Ok((StatusCode::CREATED, Json(Created { id, width, height })).into_response())
}

async fn segment(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(params): Json<SegmentParams>,
) -> Result<Response, ApiError> {
    let edge = state.config.preview_max_edge;
    let resp = with_session(&state, &id, move |s| s.segment(&params, edge)).await?;
    Ok(Json(resp).into_response())
}

async fn extract(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ExtractRequest>,
) -> Result<Response, ApiError> {
    let edge = state.config.preview_max_edge;
    let resp = with_session(&state, &id, move |s| {
        let selection = SegmentSelection::new(req.segments.iter().copied(), req.fill)?;
        s.extract(&selection, &req.canny.unwrap_or_default(), edge)
    })
    .await?;
    Ok(Json(resp).into_response())
}

async fn histograms(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let resp = with_session(&state, &id, |s| Ok(s.histograms())).await?;
    Ok(Json(resp).into_response())
}

async fn history(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let steps: Vec<HistoryStep> = with_session(&state, &id, |s| Ok(s.history().to_vec())).await?;
    Ok(Json(steps).into_response())
}

async fn artifact(
    State(state): State<AppState>,
    Path((id, name)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let art = with_session(&state, &id, move |s| {
        s.artifact(&name)
            .cloned()
            .ok_or_else(|| ApiError::not_found(&format!("artifact {name:?}")))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, art.content_type)], art.bytes).into_response())
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if state.sessions.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found("session"))
    }
}

pub fn router(state: AppState) -> Router {
    let limit = state.config.max_upload_bytes;
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", delete(delete_session))
        .route("/sessions/{id}/segment", post(segment))
        .route("/sessions/{id}/extract", post(extract))
        .route("/sessions/{id}/histograms", get(histograms))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/artifacts/{name}", get(artifact))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Periodically drops sessions idle past the configured TTL.
pub fn spawn_sweeper(state: AppState) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(state.config.sweep_interval());
        loop {
            tick.tick().await;
            state.sessions.sweep(Instant::now(), state.config.session_ttl());
        }
    })
}

/// Binds the configured address and serves until the process exits.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(config);
    let listener = tokio::net::TcpListener::bind(state.config.addr()).await?;
    eprintln!("histoseg-service listening on {}", listener.local_addr()?);
    spawn_sweeper(state.clone());
    axum::serve(listener, router(state)).await
}
