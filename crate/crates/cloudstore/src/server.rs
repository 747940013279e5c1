//! The HTTP service: login, upload, list, fetch, health.
//!
//! Every data endpoint checks the bearer token before touching storage.
//! Uploads missing an analysis get one computed here before the record is
//! persisted, so a fetched record always carries the server's analysis.

use crate::auth::{self, AuthError, TokenStore};
use crate::records::{NewTraceRecord, TraceRecord};
use crate::store::RecordStore;
use axum::body::Bytes;
use axum::extract::{Path as AxumPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{Duration, Utc};
use paperecg_core::analysis::{analyze, AnalysisConfig};
use serde::Deserialize;
use serde_json::json;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

/// Service settings; every field has an `EHEALTH_*` environment fallback.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub data_dir: PathBuf,
    pub credentials_path: PathBuf,
    pub token_ttl_hours: i64,
}

impl ServiceConfig {
    /// Reads EHEALTH_PORT, EHEALTH_DATA_DIR, EHEALTH_CREDENTIALS and
    /// EHEALTH_TOKEN_TTL_HOURS, with defaults for anything unset.
    pub fn from_env() -> Self {
        let data_dir = PathBuf::from(
            std::env::var("EHEALTH_DATA_DIR").unwrap_or_else(|_| "ehealth-data".into()),
        );
        let credentials_path = std::env::var("EHEALTH_CREDENTIALS")
            .map(PathBuf::from)
            .unwrap_or_else(|_| data_dir.join("credentials.json"));
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: std::env::var("EHEALTH_PORT")
                .ok()
                .and_then(|p| p.parse().ok())
                .unwrap_or(8600),
            data_dir,
            credentials_path,
            token_ttl_hours: std::env::var("EHEALTH_TOKEN_TTL_HOURS")
                .ok()
                .and_then(|p| p.parse().ok())
                .unwrap_or(24),
        }
    }
}

struct AppState {
    store: RecordStore,
    tokens: TokenStore,
    credentials_path: PathBuf,
}

pub fn router(cfg: &ServiceConfig) -> std::io::Result<Router> {
    let state = Arc::new(AppState {
        store: RecordStore::open(&cfg.data_dir)?,
        tokens: TokenStore::new(Duration::hours(cfg.token_ttl_hours)),
        credentials_path: cfg.credentials_path.clone(),
    });
    Ok(Router::new()
        .route("/api/health", get(health))
        .route("/api/login", post(login))
        .route("/api/traces", post(store_trace).get(list_traces))
        .route("/api/traces/{id}", get(fetch_trace))
        .with_state(state))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Deserialize)]
struct LoginRequest {
    username: String,
    password: String,
}

async fn login(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let Ok(req) = serde_json::from_slice::<LoginRequest>(&body) else {
        return error_response(StatusCode::UNPROCESSABLE_ENTITY, "malformed login body");
    };
    let creds = match auth::load_credentials(&state.credentials_path) {
        Ok(c) => c,
        Err(e) => return error_response(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
    };
    if !auth::verify_password(&creds, &req.username, &req.password) {
        return error_response(StatusCode::UNAUTHORIZED, &AuthError::InvalidCredentials.to_string());
    }
    let session = state.tokens.issue(&req.username);
    (
        StatusCode::OK,
        Json(json!({"token": session.token, "expires_at": session.expires_at})),
    )
        .into_response()
}

/// Bearer-token check; runs before any storage access.
fn authorize(state: &AppState, headers: &HeaderMap) -> Result<String, Response> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .ok_or_else(|| error_response(StatusCode::UNAUTHORIZED, "missing bearer token"))?;
    state
        .tokens
        .validate(token)
        .map_err(|e| error_response(StatusCode::UNAUTHORIZED, &e.to_string()))
}

async fn store_trace(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let _user = match authorize(&state, &headers) {
        Ok(u) => u,
        Err(r) => return r,
    };
    let new: NewTraceRecord = match serde_json::from_slice(&body) {
        Ok(n) => n,
        Err(e) => {
            return error_response(
                StatusCode::UNPROCESSABLE_ENTITY,
                &format!("malformed record: {e}"),
            )
        }
    };
    if let Err(e) = new.signal.validate() {
        return error_response(StatusCode::UNPROCESSABLE_ENTITY, &e.to_string());
    }
    // "Further processing tasks" happen here: absent analyses are computed
    // before the record lands on disk.
    let analysis = match new.analysis {
        Some(a) => a,
        None => analyze(&new.signal, &AnalysisConfig::default()).report,
    };
    let record = TraceRecord {
        schema_version: TraceRecord::SCHEMA_VERSION,
        id: state.store.allocate_id(),
        patient_ref: new.patient_ref,
        lead_label: new.lead_label.unwrap_or_else(|| new.signal.lead_label.clone()),
        created_at: Utc::now(),
        signal: new.signal,
        analysis: Some(analysis),
        source_image_ref: new.source_image_ref,
    };
    match state.store.persist(&record) {
        Ok(()) => (StatusCode::CREATED, Json(json!({"id": record.id}))).into_response(),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
    }
}

#[derive(Deserialize)]
struct ListQuery {
    patient_ref: Option<String>,
}

async fn list_traces(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(query): Query<ListQuery>,
) -> Response {
    if let Err(r) = authorize(&state, &headers) {
        return r;
    }
    match state.store.list(query.patient_ref.as_deref()) {
        Ok(summaries) => (StatusCode::OK, Json(json!({"summaries": summaries}))).into_response(),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
    }
}

async fn fetch_trace(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    AxumPath(id): AxumPath<String>,
) -> Response {
    if let Err(r) = authorize(&state, &headers) {
        return r;
    }
    match state.store.fetch_bytes(&id) {
        // Stored bytes verbatim: fetch must be byte-identical to persist.
        Ok(Some(bytes)) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "application/json")],
            bytes,
        )
            .into_response(),
        Ok(None) => error_response(StatusCode::NOT_FOUND, "no such trace"),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
    }
}

fn error_response(status: StatusCode, message: &str) -> Response {
    (status, Json(json!({"error": message}))).into_response()
}

/// A service running on a background thread with its own runtime.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl RunningServer {
    /// Stops the server and waits for the thread to exit.
    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(handle) = self.thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

/// Starts the service on a background thread; `port` 0 picks a free port.
pub fn spawn(cfg: &ServiceConfig) -> std::io::Result<RunningServer> {
    let app = router(cfg)?;
    let bind = format!("{}:{}", cfg.bind, cfg.port);
    let (addr_tx, addr_rx) = std::sync::mpsc::channel();
    let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .expect("tokio runtime");
        rt.block_on(async move {
            let listener = match tokio::net::TcpListener::bind(&bind).await {
                Ok(l) => l,
                Err(e) => {
                    let _ = addr_tx.send(Err(e));
                    return;
                }
            };
            let addr = listener.local_addr().expect("bound listener has an address");
            let _ = addr_tx.send(Ok(addr));
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = shutdown_rx.await;
                })
                .await
                .expect("server run");
        });
    });
    let addr = addr_rx
        .recv()
        .map_err(|_| std::io::Error::other("server thread died before binding"))??;
    Ok(RunningServer {
        addr,
        shutdown: Some(shutdown_tx),
        thread: Some(thread),
    })
}

/// Runs the service on the current thread until interrupted.
pub fn run_blocking(cfg: &ServiceConfig) -> std::io::Result<()> {
    let app = router(cfg)?;
    let bind = format!("{}:{}", cfg.bind, cfg.port);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}
