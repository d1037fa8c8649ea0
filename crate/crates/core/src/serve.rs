//! Local HTTP API for the annotation studio.
//!
//! Every non-2xx response carries an [`ApiError`] JSON body. Request bodies
//! are read as raw bytes and decoded here so malformed JSON also produces an
//! `ApiError` instead of the framework's plain-text rejection.

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tower_http::services::ServeDir;

use crate::dataset::openpose::OpenPoseDocument;
use crate::dataset::templates::{SkeletonJson, SubjectTemplate, TemplateError, TemplateStore};
use crate::pipeline::{self, AlignSummary, PipelineError};
use crate::render::RenderSpecPatch;
use crate::retarget::{AlignError, AlignmentConfig, JointStatus};
use crate::skeleton::{Canvas, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    Conflict,
    ComputeError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
    #[serde(skip)]
    pub status: u16,
}

impl ApiError {
    fn new(status: StatusCode, code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), detail: None, status: status.as_u16() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, ErrorCode::BadRequest, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, ErrorCode::NotFound, message)
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<TemplateError> for ApiError {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::NotFound(_) => ApiError::not_found(e.to_string()),
            TemplateError::NameMismatch { .. } => {
                ApiError::new(StatusCode::CONFLICT, ErrorCode::Conflict, e.to_string())
            }
            TemplateError::Io { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, ErrorCode::ComputeError, e.to_string())
            }
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match &e {
            PipelineError::Align(AlignError::NoCommonBones | AlignError::ReferenceRootMissing(_)) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, ErrorCode::ComputeError, e.to_string())
            }
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<TemplateStore>,
    pub started: Instant,
    /// Canvas assumed for documents without canvas fields.
    pub default_canvas: Canvas,
}

impl AppState {
    pub fn new(store: TemplateStore) -> Self {
        Self { store: Arc::new(store), started: Instant::now(), default_canvas: Canvas::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubjectRef {
    Template(String),
    Inline(SkeletonJson),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignRequest {
    pub reference: OpenPoseDocument,
    pub subject: SubjectRef,
    #[serde(default)]
    pub config: AlignmentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignResponse {
    pub aligned: OpenPoseDocument,
    pub b: f64,
    pub status: Vec<JointStatus>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    pub skeleton: OpenPoseDocument,
    #[serde(default)]
    pub spec: RenderSpecPatch,
}

fn decode<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn json_bytes(status: StatusCode, bytes: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

async fn healthz(State(state): State<AppState>) -> Json<Value> {
    Json(serde_json::json!({
        "version": crate::VERSION,
        "uptime_seconds": state.started.elapsed().as_secs_f64(),
    }))
}

async fn list_templates(State(state): State<AppState>) -> Result<Json<Vec<String>>, ApiError> {
    Ok(Json(state.store.list()?))
}

async fn get_template(State(state): State<AppState>, Path(name): Path<String>) -> Result<Response, ApiError> {
    let t = state.store.get(&name)?;
    Ok(json_bytes(StatusCode::OK, t.to_json()))
}

async fn put_template(
    State(state): State<AppState>,
    Path(name): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    crate::dataset::templates::validate_name(&name)?;
    let t = SubjectTemplate::from_json(&body)?;
    if t.name != name {
        return Err(TemplateError::NameMismatch { path: name, body: t.name }.into());
    }
    state.store.put(&t)?;
    Ok(json_bytes(StatusCode::OK, t.to_json()))
}

async fn delete_template(State(state): State<AppState>, Path(name): Path<String>) -> Result<StatusCode, ApiError> {
    state.store.delete(&name)?;
    Ok(StatusCode::NO_CONTENT)
}

fn resolve_subject(state: &AppState, subject: &SubjectRef) -> Result<Skeleton, ApiError> {
    match subject {
        SubjectRef::Template(name) => Ok(state.store.get(name)?.skeleton),
        SubjectRef::Inline(json) => json.to_skeleton().map_err(|e| ApiError::bad_request(format!("subject: {e}"))),
    }
}

/// Runs an alignment request against `state`; the HTTP handler is a thin
/// wrapper around this.
pub fn handle_align(state: &AppState, req: &AlignRequest) -> Result<AlignResponse, ApiError> {
    req.config.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    let subject = resolve_subject(state, &req.subject)?;
    let result = pipeline::align_document(&req.reference, &subject, &req.config, state.default_canvas)?;
    let summary = AlignSummary::from(&result);
    Ok(AlignResponse { aligned: pipeline::aligned_document(&result), b: summary.b, status: summary.status })
}

async fn align(State(state): State<AppState>, body: Bytes) -> Result<Json<AlignResponse>, ApiError> {
    let req: AlignRequest = decode(&body)?;
    handle_align(&state, &req).map(Json)
}

async fn render(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: RenderRequest = decode(&body)?;
    let png = pipeline::render_document_png(&req.skeleton, &req.spec, state.default_canvas).map_err(|e| {
        let err = ApiError::from(e);
        let spec = serde_json::to_value(&req.spec).unwrap_or(Value::Null);
        err.with_detail(serde_json::json!({ "spec": spec }))
    })?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn api_not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/templates", get(list_templates))
        .route("/templates/:name", get(get_template).put(put_template).delete(delete_template))
        .route("/align", post(align))
        .route("/render", post(render));
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(api_not_found),
    };
    app.with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    static_dir: Option<PathBuf>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state, static_dir)).with_graceful_shutdown(shutdown).await
}
