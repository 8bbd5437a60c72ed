//! HTTP/JSON search service over a design index.
//!
//! Readers take a cheap clone of the current `Arc<DesignIndex>` and work on
//! that snapshot; writers are serialized, build a new index off to the side
//! and swap it in, so a GET never sees a half-applied POST.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tdassist_core::drawing::Drawing;
use tdassist_core::index::{DesignIndex, IndexError};
use tdassist_core::similarity::{RankedDesign, TriState, DEFAULT_ALPHA};
use thiserror::Error;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server failed: {0}")]
    Serve(std::io::Error),
}

/// Error body: `{"code": ..., "message": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status: status.as_u16(), code: code.into(), message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<IndexError> for ApiError {
    fn from(e: IndexError) -> Self {
        let msg = e.to_string();
        match e {
            IndexError::Conflict(_) => Self::new(StatusCode::CONFLICT, "conflict", msg),
            IndexError::PartialDesign(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "partial_design", msg),
            IndexError::UnknownDesign(_) => Self::new(StatusCode::NOT_FOUND, "not_found", msg),
            IndexError::Empty => Self::new(StatusCode::CONFLICT, "empty_index", msg),
            IndexError::Drawing(_) => Self::new(StatusCode::BAD_REQUEST, "invalid_document", msg),
            IndexError::Similarity(_) => Self::new(StatusCode::BAD_REQUEST, "invalid_query", msg),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", msg),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub struct AppState {
    snapshot: RwLock<Arc<DesignIndex>>,
    writer: tokio::sync::Mutex<()>,
    /// Where accepted writes are persisted, if anywhere.
    store: Option<PathBuf>,
}

impl AppState {
    pub fn new(index: DesignIndex, store: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState { snapshot: RwLock::new(Arc::new(index)), writer: tokio::sync::Mutex::new(()), store })
    }

    pub fn snapshot(&self) -> Arc<DesignIndex> {
        self.snapshot.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn install(&self, index: DesignIndex) {
        *self.snapshot.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(index);
    }
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_k() -> usize {
    DEFAULT_K
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub document: serde_json::Value,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternState {
    pub bit: usize,
    pub pattern: String,
    pub value: TriState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialResponse {
    pub ranking: Vec<RankedDesign>,
    pub provenance: Vec<PatternState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub id: String,
    pub digest: String,
    pub has_visual: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignView {
    pub id: String,
    pub digest: String,
    pub facts: Vec<String>,
    pub features: Vec<bool>,
    pub visual: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternView {
    pub bit: usize,
    pub pattern: String,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddResponse {
    pub id: String,
    pub added: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: u32,
    pub designs: usize,
    pub patterns: usize,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/designs", get(list_designs).post(add_design))
        .route("/designs/{id}", get(get_design))
        .route("/patterns", get(patterns))
        .route("/query", post(query))
        .route("/query/partial", post(query_partial))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> Result<(), ServerError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServerError::Bind { addr, source })?;
    log::info!("listening on {}", listener.local_addr().map_or(addr, |a| a));
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServerError::Serve)
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn parse_document(value: &serde_json::Value) -> ApiResult<Drawing> {
    let bytes = serde_json::to_vec(value).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Drawing::from_json(&bytes).map_err(|e| ApiError::from(IndexError::from(e)))
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn health(State(s): State<Arc<AppState>>) -> Json<Health> {
    let idx = s.snapshot();
    Json(Health { status: "ok".into(), version: idx.version, designs: idx.len(), patterns: idx.patterns.len() })
}

async fn list_designs(State(s): State<Arc<AppState>>) -> Json<Vec<DesignSummary>> {
    let idx = s.snapshot();
    Json(
        idx.designs
            .values()
            .map(|d| DesignSummary { id: d.id.clone(), digest: d.digest.clone(), has_visual: d.visual.is_some() })
            .collect(),
    )
}

async fn get_design(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<DesignView>> {
    let idx = s.snapshot();
    let d = idx.get(&id).ok_or_else(|| ApiError::from(IndexError::UnknownDesign(id.clone())))?;
    Ok(Json(DesignView {
        id: d.id.clone(),
        digest: d.digest.clone(),
        facts: d.facts.iter().map(|a| a.to_string()).collect(),
        features: d.features.clone(),
        visual: d.visual.clone(),
    }))
}

async fn patterns(State(s): State<Arc<AppState>>) -> Json<Vec<PatternView>> {
    let idx = s.snapshot();
    Json(
        idx.patterns
            .patterns
            .iter()
            .enumerate()
            .map(|(bit, m)| PatternView { bit, pattern: m.pattern.to_string(), support: m.support })
            .collect(),
    )
}

async fn add_design(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let value: serde_json::Value = parse_body(&body)?;
    let drawing = parse_document(&value)?;
    let _guard = s.writer.lock().await;
    let current = s.snapshot();
    let state = s.clone();
    let added = blocking(move || {
        let mut next = (*current).clone();
        let added = next.add_design(&drawing)?;
        if added {
            if let Some(path) = &state.store {
                next.persist(path)?;
            }
            state.install(next);
        }
        Ok(AddResponse { id: drawing.id, added })
    })
    .await?;
    let status = if added.added { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(added)).into_response())
}

async fn query(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Vec<RankedDesign>>> {
    let req: QueryRequest = parse_body(&body)?;
    let drawing = parse_document(&req.document)?;
    let idx = s.snapshot();
    blocking(move || Ok(Json(idx.rank(&drawing, req.alpha, req.k)?))).await
}

async fn query_partial(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<PartialResponse>> {
    let req: QueryRequest = parse_body(&body)?;
    let drawing = parse_document(&req.document)?;
    let idx = s.snapshot();
    blocking(move || {
        let (ranking, tri) = idx.rank_partial(&drawing, req.alpha, req.k)?;
        let provenance = idx
            .patterns
            .iter()
            .zip(tri)
            .enumerate()
            .map(|(bit, (p, value))| PatternState { bit, pattern: p.to_string(), value })
            .collect();
        Ok(Json(PartialResponse { ranking, provenance }))
    })
    .await
}
