//! Library side of the `platoon` command: config files, presets, run
//! artifacts and comparison reports.

use std::path::PathBuf;

use platoon_core::error::SimError;
use platoon_core::trace::TraceError;
use thiserror::Error;

pub mod config;
pub mod output;
pub mod presets;
pub mod report;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COLLISION: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Trace { path: PathBuf, source: TraceError },

    #[error(transparent)]
    Sim(#[from] SimError),

    #[error("collision in {}", .0.join(", "))]
    Collision(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Sim(SimError::Config { .. }) => EXIT_CONFIG,
            CliError::Collision(_) => EXIT_COLLISION,
            _ => EXIT_FAILURE,
        }
    }
}
