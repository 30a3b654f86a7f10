//! HTTP front end for the experiment database.
//!
//! Every route lives under `/api/v1`. Bodies are JSON except dataset
//! uploads and file downloads, which carry raw bytes. Failures always use
//! the body `{"error": {"code", "message", "details"}}`.

mod error;
mod routes;

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use expdb_core::registry::Store;
use thiserror::Error;
use tokio::net::TcpListener;

pub use crate::error::ApiError;
pub use crate::routes::{router, MAX_BODY_BYTES};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("could not bind {addr}: {source}")]
    BindFailed { addr: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub async fn bind(addr: &str) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|source| ServeError::BindFailed {
        addr: addr.to_string(),
        source,
    })
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn serve(
    store: Arc<Store>,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(?addr, "listening");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(shutdown)
        .await?;
    tracing::info!("shut down");
    Ok(())
}

/// Resolves on ctrl-c, or SIGTERM on unix.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        () = ctrl_c => {},
        () = term => {},
    }
}
