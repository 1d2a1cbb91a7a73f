//! HTTP service for building LLM agent networks.
//!
//! Sessions hold a linear history of network revisions, a queue of training
//! examples and at most one training pipeline. Everything is persisted in a
//! directory per session; state changes are pushed to clients as server-sent
//! events.

pub mod api;
pub mod error;
pub mod service;
pub mod session;
pub mod store;

pub use api::router;
pub use error::ApiError;
pub use service::{BackendFactory, Service, ServiceConfig};
pub use session::{LanRevision, RevisionCause, Session, SessionEvent, SessionMeta};
pub use store::{Fault, StorageError, Store};

/// Version stamped on every request and response body.
pub const API_VERSION: u32 = 1;
