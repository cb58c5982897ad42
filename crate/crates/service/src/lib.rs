//! Serves the interactive protocol over HTTP: one [`pawshake::protocol::Session`]
//! per browser, with previews precomputed so every request is cheap.

pub mod api;
pub mod bridge;
pub mod error;
pub mod preview;
pub mod store;

pub use api::{router, serve, RouterOptions};
pub use bridge::{BridgeClient, BridgeError};
pub use error::ServiceError;
pub use store::{CreateSession, SessionRecord, SessionState, SessionStore, StoreConfig};

/// Environment variable holding the bind address, e.g. `127.0.0.1:8765`.
pub const ADDR_ENV: &str = "PAWSHAKE_ADDR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8765";

/// Version of every JSON payload the service emits.
pub const API_SCHEMA_VERSION: u32 = 1;

pub fn bind_addr() -> String {
    std::env::var(ADDR_ENV).unwrap_or_else(|_| DEFAULT_ADDR.to_string())
}
