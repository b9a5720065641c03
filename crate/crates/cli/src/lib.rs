//! Library side of the `survquack` command-line tool: dataset ingestion,
//! configuration files, report types and the subcommands themselves.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;

pub use error::CliError;
pub use report::ReportDocument;
