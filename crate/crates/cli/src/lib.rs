//! Batch front-end for the `circle-rpf` pipeline: configuration, potential
//! expressions, artifact I/O and the staged run.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod expr;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use pipeline::{Pipeline, RunOptions, RunSummary, Stage, Status};
