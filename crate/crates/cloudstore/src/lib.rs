//! Cloud side of the toolkit: a password-authenticated HTTP service that
//! stores digitized trace records, plus the matching client.
//!
//! Records are canonical JSON files in a flat directory with an append-only
//! id index; uploads without an analysis get one computed server-side
//! before persisting.

pub mod auth;
pub mod client;
pub mod records;
pub mod server;
pub mod store;

pub use auth::{AuthError, Credential, SessionToken, TokenStore};
pub use client::{Client, ClientError};
pub use records::{NewTraceRecord, RecordError, TraceRecord, TraceSummary};
pub use server::{run_blocking, spawn, RunningServer, ServiceConfig};
pub use store::RecordStore;
