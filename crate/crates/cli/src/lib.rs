//! Command-line front end for `pdpclust`: run configuration, sweep
//! ingestion, artifact emission and the pipeline stages behind each
//! subcommand.

pub mod config;
pub mod emit;
pub mod error;
pub mod ingest;
pub mod pipeline;

pub use error::{CliError, Stage};
