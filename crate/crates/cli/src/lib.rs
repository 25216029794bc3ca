//! Command-line harness around `plm-core`: config files, CSV metrics, SVG
//! plots, graymap dumps and saved models.

pub mod commands;
pub mod config;
pub mod csv;
pub mod pgm;
pub mod state;
pub mod svg;

use std::path::PathBuf;

use plm_core::{DataError, EngineError};
use thiserror::Error;

pub use commands::{cmd_ablate, cmd_dump_recall, cmd_eval, cmd_plot, cmd_run, AblateOutcome, RunOutcome};
pub use config::{Origin, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error ({origin}) in {key}: {msg}")]
    Config { origin: Origin, key: String, msg: String },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", .path.display())]
    Data {
        path: PathBuf,
        #[source]
        source: DataError,
    },
    #[error("CSV row {row}: {msg}")]
    Csv { row: usize, msg: String },
    #[error("model state: {0}")]
    State(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Engine(EngineError),
    #[error(transparent)]
    Explosion(EngineError),
}

impl CliError {
    /// 1 for a numeric blow-up, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Explosion(_) => 1,
            _ => 2,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        if e.is_explosion() {
            CliError::Explosion(e)
        } else {
            CliError::Engine(e)
        }
    }
}
