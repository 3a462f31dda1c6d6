//! HTTP session service over the tuner.
//!
//! Each session owns a generated workload and a tuner. Mutations go through
//! a per-session writer lock and publish an immutable [`SessionView`] that
//! reads return without taking the lock.

pub mod error;
pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use arc_swap::ArcSwap;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, Method};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};
use wftune_core::Configuration;

pub use error::ApiError;
pub use session::{
    CreateSession, Event, FeedbackResult, MaterializeResult, PartitionChoice, Session, SessionRecord, SessionView,
    StepResult,
};

struct SessionHandle {
    writer: Mutex<Session>,
    snapshot: ArcSwap<SessionView>,
}

impl SessionHandle {
    fn new(session: Session) -> Self {
        SessionHandle {
            snapshot: ArcSwap::from_pointee(session.view()),
            writer: Mutex::new(session),
        }
    }
}

/// All live sessions.
#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<SessionHandle>>>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds sessions from a snapshot file written by [`AppState::save`].
    pub fn restore(path: &Path) -> std::io::Result<Self> {
        let records: Vec<SessionRecord> = serde_json::from_slice(&std::fs::read(path)?)?;
        let state = AppState::new();
        for r in &records {
            match Session::replay(r) {
                Ok(s) => state.insert(s),
                Err(e) => warn!("dropping session {} from snapshot: {e}", r.id),
            }
        }
        Ok(state)
    }

    /// Writes every session's spec and event log as JSON.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut records: Vec<SessionRecord> = self
            .handles()
            .iter()
            .map(|h| h.writer.lock().unwrap_or_else(|p| p.into_inner()).record())
            .collect();
        records.sort_by(|a, b| a.id.cmp(&b.id));
        std::fs::write(path, serde_json::to_vec_pretty(&records)?)
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn handles(&self) -> Vec<Arc<SessionHandle>> {
        self.sessions.read().unwrap().values().cloned().collect()
    }

    fn insert(&self, s: Session) {
        let id = s.id().to_string();
        self.sessions
            .write()
            .unwrap()
            .insert(id, Arc::new(SessionHandle::new(s)));
    }

    fn handle(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    /// Runs `f` under the session's writer lock on a blocking thread, then
    /// publishes a fresh snapshot.
    async fn mutate<T, F>(&self, id: &str, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
    {
        let h = self.handle(id)?;
        tokio::task::spawn_blocking(move || {
            let mut s = h.writer.lock().unwrap_or_else(|p| p.into_inner());
            let out = f(&mut s);
            h.snapshot.store(Arc::new(s.view()));
            out
        })
        .await
        .map_err(|e| ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct StepRequest {
    pub count: usize,
}

impl Default for StepRequest {
    fn default() -> Self {
        StepRequest { count: 1 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct FeedbackRequest {
    pub positive: Configuration,
    pub negative: Configuration,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct MaterializeRequest {
    pub create: Configuration,
    pub drop: Configuration,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionList {
    pub sessions: Vec<String>,
}

async fn create_session(
    State(state): State<AppState>,
    body: Option<Json<CreateSession>>,
) -> Result<Json<SessionView>, ApiError> {
    let spec = body.map(|Json(b)| b).unwrap_or_default();
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = tokio::task::spawn_blocking(move || Session::create(id, spec))
        .await
        .map_err(|e| ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let view = session.view();
    info!("created session {}", view.id);
    state.insert(session);
    Ok(Json(view))
}

async fn list_sessions(State(state): State<AppState>) -> Json<SessionList> {
    let mut sessions: Vec<String> = state.sessions.read().unwrap().keys().cloned().collect();
    sessions.sort();
    Json(SessionList { sessions })
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    let h = state.handle(&id)?;
    Ok(Json(SessionView::clone(&h.snapshot.load())))
}

async fn step(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Option<Json<StepRequest>>,
) -> Result<Json<StepResult>, ApiError> {
    let count = body.map(|Json(b)| b).unwrap_or_default().count;
    Ok(Json(state.mutate(&id, move |s| s.step(count)).await?))
}

async fn feedback(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<FeedbackRequest>,
) -> Result<Json<FeedbackResult>, ApiError> {
    Ok(Json(
        state
            .mutate(&id, move |s| s.feedback(&body.positive, &body.negative))
            .await?,
    ))
}

async fn materialize(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<MaterializeRequest>,
) -> Result<Json<MaterializeResult>, ApiError> {
    Ok(Json(
        state
            .mutate(&id, move |s| s.materialize(&body.create, &body.drop))
            .await?,
    ))
}

/// The service routes with CORS open to any origin.
pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/materialize", post(materialize))
        .layer(cors)
        .with_state(state)
}

/// Serves until Ctrl-C. With a snapshot path, sessions are restored from
/// it at startup when it exists and written back on shutdown.
pub async fn serve(addr: SocketAddr, snapshot: Option<PathBuf>) -> std::io::Result<()> {
    let state = match &snapshot {
        Some(p) if p.exists() => {
            let s = AppState::restore(p)?;
            info!("restored {} sessions from {}", s.len(), p.display());
            s
        }
        _ => AppState::new(),
    };
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(p) = snapshot {
        state.save(&p)?;
        info!("saved {} sessions to {}", state.len(), p.display());
    }
    Ok(())
}
