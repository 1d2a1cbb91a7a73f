//! Core engine for building LLM agent networks from a handful of training
//! examples.
//!
//! - [`model`]: the network data model, validation, document format and diffs.
//! - [`gateway`]: text-completion backends (remote, scripted, record/replay).
//! - [`runtime`]: conditional DAG execution with activation gates and traces.
//! - [`update`]: the training pipeline that grows a network example by example.

pub mod gateway;
pub mod model;
pub mod runtime;
pub mod testing;
pub mod update;

pub use model::{Agent, Lan, NamedValues};
