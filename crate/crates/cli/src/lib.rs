//! Configuration, design-file persistence and the batch commands behind the
//! `lowvis` binary.

pub mod cli;
pub mod commands;
pub mod config;
pub mod design_file;
pub mod error;
pub mod report;

pub use config::Config;
pub use design_file::DesignFile;
pub use error::{CliError, CliResult};
