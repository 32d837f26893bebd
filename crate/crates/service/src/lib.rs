//! HTTP service around the controller: patients and records in, reviewed
//! suggestions and daily messages out, every change kept in an append-only
//! event log that rebuilds the state on replay.

pub mod api;
pub mod service;
pub mod sim;
pub mod state;
pub mod store;

pub use service::{ScoringMode, Service, ServiceConfig, ServiceError};
pub use state::{replay, Envelope, Event, State};
