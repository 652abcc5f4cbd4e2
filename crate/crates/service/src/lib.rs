//! HTTP/JSON API over a workspace: blocks, models, validation, rendering,
//! docs and guided sessions. Handlers are thin adapters over
//! `blockbench-core`; text outputs are the same bytes the CLI prints.

mod error;
mod routes;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::http::{HeaderValue, Method};
use axum::Router;
use blockbench_core::{load_workspace, ModelStore, SessionStore, Workspace, WorkspaceError};
use tower_http::cors::{Any, CorsLayer};

pub use error::ApiError;

/// Shared by all handlers. Blocks are loaded once at startup.
#[derive(Debug)]
pub struct AppState {
    pub workspace: Workspace,
    pub models: ModelStore,
    pub sessions: SessionStore,
}

impl AppState {
    pub fn load(root: &Path) -> Result<Self, WorkspaceError> {
        let workspace = load_workspace(root, false)?;
        Ok(AppState {
            models: ModelStore::new(workspace.models_dir()),
            sessions: SessionStore::new(workspace.sessions_dir()),
            workspace,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub workspace: PathBuf,
    pub addr: SocketAddr,
    /// Origins allowed by CORS; `*` allows any. Empty disables CORS.
    pub cors_origins: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid CORS origin '{0}'")]
    Origin(String),
}

fn cors_layer(origins: &[String]) -> Result<Option<CorsLayer>, ServeError> {
    if origins.is_empty() {
        return Ok(None);
    }
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::PUT, Method::PATCH, Method::OPTIONS])
        .allow_headers(Any);
    if origins.iter().any(|o| o == "*") {
        return Ok(Some(layer.allow_origin(Any)));
    }
    let parsed = origins
        .iter()
        .map(|o| HeaderValue::from_str(o).map_err(|_| ServeError::Origin(o.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Some(layer.allow_origin(parsed)))
}

/// The full route table over `state`.
pub fn router(state: Arc<AppState>) -> Router {
    routes::routes().with_state(state)
}

/// Like [`router`], with CORS for the given origins.
pub fn router_with_cors(state: Arc<AppState>, origins: &[String]) -> Result<Router, ServeError> {
    let app = router(state);
    Ok(match cors_layer(origins)? {
        Some(layer) => app.layer(layer),
        None => app,
    })
}

/// Runs until Ctrl-C or SIGTERM. In-flight requests, and with them any
/// model or session write they started, complete before this returns.
pub async fn serve(config: ServeConfig, on_ready: impl FnOnce(SocketAddr)) -> Result<(), ServeError> {
    let state = Arc::new(AppState::load(&config.workspace)?);
    let app = router_with_cors(state, &config.cors_origins)?;
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|source| ServeError::Bind { addr: config.addr, source })?;
    on_ready(listener.local_addr()?);
    axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
