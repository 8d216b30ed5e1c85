//! Read-only HTTP API over a loaded store snapshot, and a mock of the
//! hosted entity job service for offline runs and tests.
#![allow(clippy::result_large_err)]

pub mod error;
mod extract;
pub mod mock_ta;
pub mod routes;
pub mod runtime;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;

pub use error::ApiError;
pub use routes::{relations_query, router, ServerOptions, OPENAPI};
pub use runtime::Running;
pub use state::{AppState, Snapshot};

/// Serves `state` on a background thread.
pub fn spawn_api(state: Arc<AppState>, options: ServerOptions, addr: SocketAddr) -> std::io::Result<Running> {
    runtime::spawn(addr, move |_| router(state, &options))
}
