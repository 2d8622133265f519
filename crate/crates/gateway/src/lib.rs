//! HTTP/JSON service and CLI over the provchain ledger. All writes go
//! through one serialized writer; reads are served from snapshots.

pub mod cli;
pub mod error;
pub mod http;
pub mod service;
pub mod views;

pub use error::ApiError;
pub use service::{Gateway, Snapshot, Submitted};
