//! HTTP interface for live interim monitoring.
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | design document, optional `assignment_seed` |
//! | POST | `/sessions/{id}/outcomes` | [`OutcomeEvent`] |
//! | GET | `/sessions/{id}/state` | |
//! | POST | `/sessions/{id}/whatif` | `{seed, horizon?, forward_reps?}` |
//! | GET | `/sessions/{id}/log` | |
//! | GET | `/sessions/{id}/next-assignment` | |
//!
//! Every response carries `x-schema-version`; state and what-if bodies
//! include the design's `eps_e`, `eps_f` and `delta`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use seqtrial_core::trial_engine::TrialDesign;
use tokio::sync::Semaphore;

use crate::document::{parse_json, DesignDocument, SCHEMA_VERSION};
use crate::session::{run_whatif, OutcomeEvent, Session, SessionError, SessionHeader};
use crate::store::Store;

pub const SCHEMA_HEADER: &str = "x-schema-version";

#[derive(Debug, Clone)]
pub struct ApiConfig {
    /// Static bearer token; `None` disables the check.
    pub token: Option<String>,
    /// Largest `forward_reps` a what-if query may ask for.
    pub whatif_cap: u32,
    /// Concurrent what-if computations.
    pub whatif_workers: usize,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            token: None,
            whatif_cap: 1000,
            whatif_workers: 2,
        }
    }
}

type SessionMap = HashMap<String, Arc<Mutex<Session>>>;

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<SessionMap>>,
    store: Store,
    config: Arc<ApiConfig>,
    slots: Arc<Semaphore>,
}

impl AppState {
    pub fn new(store: Store, config: ApiConfig) -> std::io::Result<Self> {
        let sessions = store
            .load_all()?
            .into_iter()
            .map(|s| (s.id().to_string(), Arc::new(Mutex::new(s))))
            .collect();
        Ok(Self {
            sessions: Arc::new(RwLock::new(sessions)),
            store,
            slots: Arc::new(Semaphore::new(config.whatif_workers.max(1))),
            config: Arc::new(config),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, message: impl Into<String>, path: Option<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error,
                message: message.into(),
                path,
            },
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id}"), None)
    }

    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        let path = path.into();
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "validation",
            message,
            (!path.is_empty()).then_some(path),
        )
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message, None)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Conflict(m) => Self::new(StatusCode::CONFLICT, "conflict", m, None),
            SessionError::Invalid { path, message } => Self::invalid(path, message),
            SessionError::Numeric(m) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "numeric", m, None),
        }
    }
}

impl From<crate::document::DocumentError> for ApiError {
    fn from(e: crate::document::DocumentError) -> Self {
        Self::invalid(e.path, e.message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/outcomes", post(post_outcome))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/whatif", post(whatif))
        .route("/sessions/{id}/log", get(get_log))
        .route("/sessions/{id}/next-assignment", get(next_assignment))
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .layer(middleware::map_response(schema_header))
        .with_state(state)
}

async fn schema_header(mut res: Response) -> Response {
    res.headers_mut()
        .insert(SCHEMA_HEADER, HeaderValue::from(SCHEMA_VERSION));
    res
}

async fn auth(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.config.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token", None)
                .into_response();
        }
    }
    next.run(req).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    schema_version: u32,
    design: TrialDesign,
    #[serde(default)]
    assignment_seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Created {
    session_id: String,
    state: crate::session::StateSummary,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::invalid("", "body is not UTF-8"))?;
    let req: CreateRequest = parse_json(text)?;
    let header = SessionHeader {
        session_id: uuid::Uuid::new_v4().to_string(),
        document: DesignDocument {
            schema_version: req.schema_version,
            design: req.design,
        },
        assignment_seed: req.assignment_seed,
    };
    let session = Session::create(header.clone())?;
    let summary = session.state()?;
    state.store.create(&header).map_err(|e| ApiError::internal(e.to_string()))?;
    state
        .sessions
        .write()
        .expect("session map poisoned")
        .insert(header.session_id.clone(), Arc::new(Mutex::new(session)));
    Ok((
        StatusCode::CREATED,
        Json(Created {
            session_id: header.session_id,
            state: summary,
        }),
    ))
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

async fn post_outcome(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<crate::session::StateSummary>, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::invalid("", "body is not UTF-8"))?;
    let mut event: OutcomeEvent = parse_json(text)?;
    event.timestamp_ms.get_or_insert_with(now_ms);
    let handle = state.session(&id)?;
    let mut session = handle.lock().expect("session poisoned");
    // apply to a copy so a rejected or unpersisted event leaves no trace
    let mut next = session.clone();
    next.apply(event.clone())?;
    state
        .store
        .record(&id, &event)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    *session = next;
    Ok(Json(session.state()?))
}

async fn get_state(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<crate::session::StateSummary>, ApiError> {
    let handle = state.session(&id)?;
    let session = handle.lock().expect("session poisoned").clone();
    Ok(Json(session.state()?))
}

#[derive(Debug, Serialize)]
struct LogBody {
    session_id: String,
    events: Vec<OutcomeEvent>,
}

async fn get_log(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<LogBody>, ApiError> {
    let handle = state.session(&id)?;
    let events = handle.lock().expect("session poisoned").events().to_vec();
    Ok(Json(LogBody { session_id: id, events }))
}

async fn next_assignment(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<crate::session::Assignment>, ApiError> {
    let handle = state.session(&id)?;
    let session = handle.lock().expect("session poisoned");
    if let crate::session::Status::Stopped(_) = session.status() {
        return Err(SessionError::Conflict("session is stopped".into()).into());
    }
    session
        .next_assignment()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "conflict", "session uses client-side assignment", None))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIfRequest {
    seed: u64,
    #[serde(default)]
    horizon: Option<u32>,
    #[serde(default)]
    forward_reps: Option<u32>,
}

async fn whatif(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<crate::session::WhatIf>, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::invalid("", "body is not UTF-8"))?;
    let req: WhatIfRequest = parse_json(text)?;
    let cap = state.config.whatif_cap;
    let (sim, data) = {
        let handle = state.session(&id)?;
        let session = handle.lock().expect("session poisoned");
        let reps = req.forward_reps.unwrap_or(session.simulator().design().forward_reps);
        if reps > cap {
            return Err(ApiError::invalid("forward_reps", format!("at most {cap} replicates per query, got {reps}")));
        }
        (session.whatif_simulator(req.horizon, Some(reps))?, *session.data())
    };
    let _permit = state
        .slots
        .acquire()
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let out = tokio::task::spawn_blocking(move || run_whatif(&sim, &data, req.seed))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(out))
}
