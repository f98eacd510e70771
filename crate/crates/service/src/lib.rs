//! HTTP service for interactive active selection.
//!
//! Datasets are uploaded as CSV, ensembles are generated in the background
//! and cached by dataset and grid, and each session serves one query at a
//! time until its budget is spent. Everything is persisted under a store
//! directory so sessions can be rebuilt from their answer logs.

pub mod api;
mod error;
pub mod state;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;

pub use api::{router, router_with_ui};
pub use error::{ApiError, ApiResult, ErrorBody};
pub use state::{AppState, OracleKind, StartSession, Status};
pub use store::Store;

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(addr: SocketAddr, store: PathBuf, ui: Option<PathBuf>) -> std::io::Result<()> {
    let state = AppState::new(Store::open(store)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router_with_ui(state, ui)).await
}
