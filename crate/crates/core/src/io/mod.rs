//! Run configuration files and deterministic output.

pub mod config;
pub mod output;

pub use config::{LoadedModel, RunConfig};
pub use output::{to_json, write_atomic, Table};
