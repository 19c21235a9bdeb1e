//! Command-line harness for ensemble behavior cloning experiments.
//!
//! Wraps the `swarmbc-core` library with file formats (JSONL datasets, JSON
//! models, CSV results and trajectories, SVG charts), a resumable sweep
//! runner and the `swarmbc` binary.

pub mod commands;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod eval;
pub mod files;
pub mod method;
pub mod model_io;
pub mod seeds;
pub mod store;
pub mod svg;
pub mod sweep;

pub use error::{CliError, Result};
