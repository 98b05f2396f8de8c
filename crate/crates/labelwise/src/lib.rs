//! File-backed campaign store, batch and training-set formats, reports, the
//! HTTP API and the command-line front end around `labelwise-core`.

pub mod api;
pub mod batch;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod features;
pub mod files;
pub mod report;
pub mod store;
pub mod training_set;

pub use error::{Error, Result};
pub use store::{Snapshot, State, Store};

pub use labelwise_core as core;

/// Version written to `meta.json`, checkpoints and the API response header.
pub const SCHEMA_VERSION: u32 = 1;
