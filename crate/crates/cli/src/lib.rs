//! `glyphtag` command line: runs the pipeline from layered configuration.

pub mod app;
pub mod config;
pub mod error;
pub mod pipeline;

pub use app::{run, Cli, Command};
pub use config::{resolve, Layers, PipelineConfig};
pub use error::{CliError, Result};
