//! JSON HTTP service over the predex engine.
//!
//! Each uploaded dataset is a session holding its scores, named predicates,
//! explanations and bookmarks. Sessions are snapshotted to the data
//! directory on every mutation and reloaded on start.

#![recursion_limit = "512"]

mod error;
mod routes;
pub mod schema;
mod state;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use tokio::net::TcpListener;

pub use error::{ApiError, ErrorBody};
pub use routes::{router, SYNC_BUDGET, SYNC_ROW_LIMIT};
pub use state::{AppState, Job, JobStatus, Source, StoredBookmark, StoredExplanation, StoredPredicate, PALETTE};

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    /// Where session snapshots live; `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("address {0} is already in use")]
    PortBusy(String),
    #[error("could not bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("could not open data directory: {0}")]
    DataDir(std::io::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A bound listener with its state, ready to run.
pub struct Server {
    listener: TcpListener,
    state: Arc<AppState>,
}

impl Server {
    pub async fn bind(cfg: &ServeConfig) -> Result<Server, ServeError> {
        let state = match &cfg.data_dir {
            Some(dir) => AppState::open(dir).map_err(ServeError::DataDir)?,
            None => AppState::in_memory(),
        };
        let addr = format!("{}:{}", cfg.host, cfg.port);
        let listener = TcpListener::bind(&addr).await.map_err(|source| {
            if source.kind() == std::io::ErrorKind::AddrInUse {
                ServeError::PortBusy(addr.clone())
            } else {
                ServeError::Bind {
                    addr: addr.clone(),
                    source,
                }
            }
        })?;
        Ok(Server { listener, state })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub async fn run(self) -> Result<(), ServeError> {
        log::info!("listening on {}", self.listener.local_addr()?);
        axum::serve(self.listener, router(self.state)).await?;
        Ok(())
    }
}

/// Bind and serve until the process is stopped.
pub async fn serve(cfg: &ServeConfig) -> Result<(), ServeError> {
    Server::bind(cfg).await?.run().await
}
