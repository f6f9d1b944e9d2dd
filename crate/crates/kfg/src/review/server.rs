//! HTTP API over a [`ReviewStore`]. All bodies are JSON.
//!
//! | method | path | |
//! |---|---|---|
//! | GET  | `/api/videos` | videos with task counts |
//! | GET  | `/api/videos/{id}/tasks` | tasks with current status |
//! | GET  | `/api/frames/{video}/{frame}` | frame image bytes |
//! | POST | `/api/tasks/{task_id}/correction` | `{annotator_id, boxes: [{class_label, box, track_id?}], timestamp?}` |
//! | POST | `/api/tasks/{task_id}/accept` | optional `{annotator_id, timestamp?}` |
//! | POST | `/api/tasks/{task_id}/skip` | optional `{annotator_id, timestamp?}` |
//! | GET  | `/api/videos/{id}/corrections/export` | `kfgcorr/1` file |
//!
//! Errors are `{"error": ..., "field": ...}` with 400 for bad bodies,
//! 404 for unknown ids and 409 for a task that is no longer pending.

use std::net::{SocketAddr, TcpListener};
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::thread;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kfg_core::pipeline::CorrectedBox;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::oneshot;

use super::bundle::TaskStatus;
use super::store::{ReviewError, ReviewStore, Submission};
use crate::error::Error;
use crate::formats::corrections::emit_corrections_file;

#[derive(Clone)]
struct AppState {
    store: Arc<ReviewStore>,
    ui_dir: Option<Arc<PathBuf>>,
}

struct ApiError(ReviewError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, field) = match &self.0 {
            ReviewError::UnknownTask(_) | ReviewError::UnknownVideo(_) | ReviewError::UnknownFrame { .. } => (StatusCode::NOT_FOUND, None),
            ReviewError::Conflict { .. } => (StatusCode::CONFLICT, None),
            ReviewError::Invalid { field, .. } => (StatusCode::BAD_REQUEST, Some(field.clone())),
            ReviewError::Storage(_) => (StatusCode::INTERNAL_SERVER_ERROR, None),
        };
        (status, Json(json!({ "error": self.0.to_string(), "field": field }))).into_response()
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        ApiError(e)
    }
}

type ApiResult = Result<Response, ApiError>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrectionBody {
    #[serde(default)]
    task_id: Option<String>,
    annotator_id: String,
    boxes: Vec<CorrectedBox>,
    #[serde(default)]
    timestamp: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TransitionBody {
    #[serde(default)]
    annotator_id: String,
    #[serde(default)]
    timestamp: Option<u64>,
}

fn parse_body<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, ReviewError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        ReviewError::Invalid {
            field: if path == "." { "body".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

async fn list_videos(State(s): State<AppState>) -> Response {
    Json(s.store.summaries()).into_response()
}

async fn list_tasks(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    Ok(Json(s.store.video(&id)?.tasks()).into_response())
}

async fn frame_image(State(s): State<AppState>, UrlPath((video, frame)): UrlPath<(String, String)>) -> ApiResult {
    let v = s.store.video(&video)?;
    let unknown = || ReviewError::UnknownFrame {
        video_id: video.clone(),
        frame: frame.clone(),
    };
    let index: usize = frame.parse().map_err(|_| unknown())?;
    let path = v.frame_image(index).ok_or_else(unknown)?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ReviewError::Storage(Error::io(&path, e)))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

async fn export(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let file = s.store.video(&id)?.export();
    Ok(([(header::CONTENT_TYPE, "application/json")], emit_corrections_file(&file)).into_response())
}

async fn submit(s: AppState, task_id: String, sub: Submission) -> ApiResult {
    let store = s.store.clone();
    let task = tokio::task::spawn_blocking(move || store.submit(&task_id, sub))
        .await
        .map_err(|e| ReviewError::Storage(Error::Bundle(e.to_string())))??;
    Ok(Json(task).into_response())
}

async fn post_correction(State(s): State<AppState>, UrlPath(task_id): UrlPath<String>, body: Bytes) -> ApiResult {
    let body: CorrectionBody = parse_body(&body)?;
    if body.task_id.as_ref().is_some_and(|t| *t != task_id) {
        return Err(ReviewError::Invalid {
            field: "task_id".into(),
            message: "does not match the task in the path".into(),
        }
        .into());
    }
    let sub = Submission {
        status: TaskStatus::Corrected,
        boxes: body.boxes,
        annotator_id: body.annotator_id,
        timestamp: body.timestamp,
    };
    submit(s, task_id, sub).await
}

async fn transition(s: AppState, task_id: String, body: Bytes, status: TaskStatus) -> ApiResult {
    let body: TransitionBody = if body.iter().all(u8::is_ascii_whitespace) {
        TransitionBody::default()
    } else {
        parse_body(&body)?
    };
    let sub = Submission {
        status,
        boxes: Vec::new(),
        annotator_id: body.annotator_id,
        timestamp: body.timestamp,
    };
    submit(s, task_id, sub).await
}

async fn post_accept(State(s): State<AppState>, UrlPath(task_id): UrlPath<String>, body: Bytes) -> ApiResult {
    transition(s, task_id, body, TaskStatus::AcceptedAsIs).await
}

async fn post_skip(State(s): State<AppState>, UrlPath(task_id): UrlPath<String>, body: Bytes) -> ApiResult {
    transition(s, task_id, body, TaskStatus::Skipped).await
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("bmp") => "image/bmp",
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(s): State<AppState>, uri: Uri) -> Response {
    let Some(root) = s.ui_dir else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    let path = root.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

/// The API routes, plus static files from `ui_dir` for any other path.
pub fn router(store: Arc<ReviewStore>, ui_dir: Option<PathBuf>) -> Router {
    let state = AppState {
        store,
        ui_dir: ui_dir.map(Arc::new),
    };
    Router::new()
        .route("/api/videos", get(list_videos))
        .route("/api/videos/{id}/tasks", get(list_tasks))
        .route("/api/videos/{id}/corrections/export", get(export))
        .route("/api/frames/{video}/{frame}", get(frame_image))
        .route("/api/tasks/{task_id}/correction", post(post_correction))
        .route("/api/tasks/{task_id}/accept", post(post_accept))
        .route("/api/tasks/{task_id}/skip", post(post_skip))
        .fallback(get(static_file))
        .with_state(state)
}

/// A server running on its own thread and runtime.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl RunningServer {
    pub fn shutdown(mut self) {
        self.stop();
    }

    /// Blocks until the server exits.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.stop();
    }
}

pub fn spawn_server(store: Arc<ReviewStore>, ui_dir: Option<PathBuf>, addr: SocketAddr) -> Result<RunningServer, Error> {
    let listener = TcpListener::bind(addr).map_err(|e| Error::io(PathBuf::from(addr.to_string()), e))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| Error::io(PathBuf::from(addr.to_string()), e))?;
    let local = listener.local_addr().map_err(|e| Error::io(PathBuf::from(addr.to_string()), e))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io(PathBuf::from("tokio"), e))?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(store, ui_dir);
    let thread = thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(RunningServer {
        addr: local,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
