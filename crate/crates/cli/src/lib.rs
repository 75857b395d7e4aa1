//! Orchestration for the `bnnv` command: run configuration, dataset and model
//! files, trajectory logs, summary reports, and the subcommands that produce them.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod json;
pub mod model_file;
pub mod report;
pub mod trajectory;

pub use config::{Method, RunConfig};
pub use error::{CliError, Result};
pub use model_file::ModelFile;
pub use report::SummaryReport;
