//! HTTP JSON API over the prediction pipeline.
//!
//! `POST /meshes` takes an OBJ or `.pat` document as the request body and
//! returns an opaque handle. `POST /predict` runs the pipeline on a stored
//! mesh. `GET /health` reports which models are loaded.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{DefaultBodyLimit, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use flowsurrogate::features::GateDistanceTable;
use flowsurrogate::mesh::{geodesic_distances, parse_mesh, GateRecord, GatesDocument, LoadedMesh, MeshFormat, TechnologicalParameters};
use flowsurrogate::pipeline::{prepare, run_prepared, Models, ModelVersions, PipelineConfig, PipelineError, PreparedMesh};
use lru::LruCache;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

pub const DEFAULT_UPLOAD_LIMIT: usize = 64 * 1024 * 1024;
pub const DEFAULT_CAPACITY: usize = 16;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub pipeline: PipelineConfig,
    /// Meshes kept in memory; the least recently used is dropped first.
    pub capacity: usize,
    pub upload_limit: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { pipeline: PipelineConfig::default(), capacity: DEFAULT_CAPACITY, upload_limit: DEFAULT_UPLOAD_LIMIT }
    }
}

/// One uploaded mesh with its preprocessing and per-gate geodesics.
pub struct Session {
    loaded: LoadedMesh<f64>,
    prep: PreparedMesh<f64>,
    geodesics: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl Session {
    fn distances(&self, vertex: usize) -> Result<Arc<Vec<f64>>, ApiError> {
        if let Some(row) = self.geodesics.lock().unwrap().get(&vertex) {
            return Ok(row.clone());
        }
        let row = Arc::new(geodesic_distances(&self.prep.graph, vertex).map_err(ApiError::unprocessable)?);
        self.geodesics.lock().unwrap().insert(vertex, row.clone());
        Ok(row)
    }

    pub fn cached_gates(&self) -> usize {
        self.geodesics.lock().unwrap().len()
    }
}

pub struct AppState {
    models: Models,
    versions: ModelVersions,
    config: ServiceConfig,
    store: Mutex<LruCache<String, Arc<Session>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(models: Models, config: ServiceConfig) -> Arc<Self> {
        let cap = NonZeroUsize::new(config.capacity.max(1)).unwrap();
        Arc::new(Self {
            versions: models.versions(),
            models,
            config,
            store: Mutex::new(LruCache::new(cap)),
            next_id: AtomicU64::new(1),
        })
    }

    /// Handles currently stored, most recently used first.
    pub fn handles(&self) -> Vec<String> {
        self.store.lock().unwrap().iter().map(|(k, _)| k.clone()).collect()
    }

    pub fn session(&self, handle: &str) -> Option<Arc<Session>> {
        self.store.lock().unwrap().get(handle).cloned()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl ToString) -> Self {
        Self { status, message: message.to_string() }
    }

    fn unprocessable(e: impl ToString) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, e)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::MissingModel(_) => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e)
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: &self.message })).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshInfo {
    pub handle: String,
    pub format: MeshFormat,
    pub vertex_count: usize,
    pub face_count: usize,
    pub bounding_box: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub handle: String,
    pub gates: Vec<GateRecord>,
    #[serde(default)]
    pub parameters: Option<TechnologicalParameters>,
    /// Skip the deflection stage when false.
    #[serde(default = "yes")]
    pub deflection: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub handle: String,
    pub vertex_count: usize,
    pub fill_time: Vec<f64>,
    pub deflection: Option<Vec<f64>>,
    pub models: ModelVersions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    /// `ok` with both models loaded, `degraded` otherwise.
    pub status: String,
    pub missing: Vec<String>,
    pub models: ModelVersions,
    pub stored_meshes: usize,
    pub capacity: usize,
}

async fn upload(State(state): State<Arc<AppState>>, body: String) -> Result<Json<MeshInfo>, ApiError> {
    let config = state.config.pipeline.clone();
    let session = tokio::task::spawn_blocking(move || -> Result<Session, ApiError> {
        let loaded: LoadedMesh<f64> = parse_mesh(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
        let prep = prepare(loaded.mesh.clone(), &config, config.seed)?;
        Ok(Session { loaded, prep, geodesics: Mutex::new(HashMap::new()) })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))??;
    let mesh = &session.loaded.mesh;
    let (min, max) = mesh.bounding_box();
    let handle = format!("m{:08x}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let info = MeshInfo {
        handle: handle.clone(),
        format: session.loaded.format,
        vertex_count: mesh.vertex_count(),
        face_count: mesh.face_count(),
        bounding_box: BoundingBox { min, max },
    };
    state.store.lock().unwrap().put(handle, Arc::new(session));
    Ok(Json(info))
}

fn predict_blocking(state: &AppState, session: &Session, req: PredictRequest) -> Result<PredictResponse, ApiError> {
    let doc = GatesDocument { gates: req.gates, parameters: req.parameters };
    let gates = session.loaded.resolve_gates(&doc).map_err(ApiError::unprocessable)?;
    let params = doc.parameters.clone().unwrap_or_default();
    params.validate().map_err(ApiError::unprocessable)?;
    if req.deflection && state.models.deflection.is_none() {
        return Err(PipelineError::MissingModel("deflection").into());
    }
    if state.models.fill_time.is_none() {
        return Err(PipelineError::MissingModel("fill-time").into());
    }
    let rows = gates.iter().map(|g| session.distances(g.node_id).map(|r| r.to_vec())).collect::<Result<Vec<_>, _>>()?;
    let table = GateDistanceTable::from_rows(rows);
    let (fill_time, deflection, _, _) =
        run_prepared(&session.prep, &gates, &table, &params, &state.models, &state.config.pipeline, req.deflection)?;
    Ok(PredictResponse {
        handle: req.handle,
        vertex_count: fill_time.len(),
        fill_time,
        deflection,
        models: state.versions.clone(),
    })
}

async fn predict(State(state): State<Arc<AppState>>, Json(req): Json<PredictRequest>) -> Result<Response, ApiError> {
    let session = state
        .session(&req.handle)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown mesh handle {:?}", req.handle)))?;
    let start = std::time::Instant::now();
    let st = state.clone();
    let body = tokio::task::spawn_blocking(move || predict_blocking(&st, &session, req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))??;
    let mut resp = Json(body).into_response();
    // timing goes in a header so identical requests give identical bodies
    let timing = format!("pipeline;dur={:.3}", start.elapsed().as_secs_f64() * 1e3);
    if let Ok(v) = HeaderValue::from_str(&timing) {
        resp.headers_mut().insert("server-timing", v);
    }
    Ok(resp)
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let mut missing = Vec::new();
    if state.models.fill_time.is_none() {
        missing.push("fill-time model".to_string());
    }
    if state.models.deflection.is_none() {
        missing.push("deflection weights".to_string());
    }
    Json(Health {
        status: if missing.is_empty() { "ok" } else { "degraded" }.into(),
        missing,
        models: state.versions.clone(),
        stored_meshes: state.store.lock().unwrap().len(),
        capacity: state.config.capacity,
    })
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.upload_limit;
    Router::new()
        .route("/meshes", post(upload))
        .route("/predict", post(predict))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(limit))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
