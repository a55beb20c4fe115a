//! HTTP service, scheduler thread and webhook delivery around the mission
//! engine. The `wedo` binary wires these together.

pub mod api;
pub mod service;
pub mod webhook;

pub use api::{router, AppState, Inbound};
pub use service::{Service, ServiceOptions, TransportKind};
