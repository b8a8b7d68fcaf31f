//! Config ingestion, experiment dispatch and report writing behind the
//! `blsat` binary.

pub mod commands;
pub mod config;
pub mod report;

use std::fmt;

pub use commands::execute;
pub use config::{parse_config, Command, ConfigError, ExperimentConfig};
pub use report::{ExperimentReport, Status};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(blsat_core::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Io(_) => EXIT_IO,
            Self::Core(e) => match Status::of_error(e) {
                Some(status) => status.exit_code(),
                // Everything else is input the operation cannot work with.
                None => EXIT_CONFIG,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => e.fmt(f),
            Self::Core(e) => e.fmt(f),
            Self::Io(e) => f.write_str(e),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<blsat_core::Error> for CliError {
    fn from(e: blsat_core::Error) -> Self {
        Self::Core(e)
    }
}
