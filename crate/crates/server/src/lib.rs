//! HTTP service over coder sessions.
//!
//! Mutations arrive as operator envelopes carrying the version the client last
//! saw; a stale version is answered with `409 VersionConflict`. Every accepted
//! mutation is written to `<data_dir>/<session_id>.json` before the response.

mod error;
mod routes;
mod state;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::http::HeaderValue;
use axum::Router;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use routes::compare_sessions;
pub use state::{valid_session_id, AppState, ServerConfig, StartupError};

pub fn router(app: Arc<AppState>) -> Router {
    let mut router = routes::api_router();
    if let Some(dir) = &app.config.static_dir {
        router = router.fallback_service(ServeDir::new(dir));
    }
    if let Some(origin) = &app.config.cors_origin {
        let allow = if origin == "*" {
            AllowOrigin::any()
        } else {
            AllowOrigin::exact(HeaderValue::from_str(origin).unwrap_or(HeaderValue::from_static("null")))
        };
        router = router.layer(CorsLayer::new().allow_origin(allow).allow_methods(Any).allow_headers(Any));
    }
    router.with_state(app)
}

/// Serves on an already bound listener until the task is dropped or Ctrl-C.
pub async fn serve(app: Arc<AppState>, listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Loads state, binds `addr`, and returns the bound address with the server task.
pub async fn spawn(
    config: ServerConfig,
    addr: SocketAddr,
) -> Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>), Box<dyn std::error::Error + Send + Sync>> {
    let app = Arc::new(AppState::load(config)?);
    let listener = TcpListener::bind(addr).await?;
    let bound = listener.local_addr()?;
    Ok((bound, tokio::spawn(serve(app, listener))))
}
