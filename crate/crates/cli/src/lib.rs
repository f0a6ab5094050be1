//! Driver behind the `semiflow-lab` binary: configuration parsing, command
//! dispatch and deterministic file output.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;
use std::path::PathBuf;

pub use commands::{run_command, Command, Outcome};
pub use config::{load_config, parse_config, ConfigError, RunConfig};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Model(semiflow_core::Error),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config: {e}"),
            RunError::Model(e) => write!(f, "{e}"),
            RunError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<semiflow_core::Error> for RunError {
    fn from(e: semiflow_core::Error) -> Self {
        RunError::Model(e)
    }
}

impl RunError {
    /// One-line JSON record for the diagnostic stream.
    pub fn to_record(&self) -> String {
        let value = match self {
            RunError::Config(e) => serde_json::json!({
                "error": "config",
                "key": e.key,
                "line": e.line,
                "message": e.message,
            }),
            RunError::Model(e) => serde_json::json!({
                "error": "model",
                "message": e.to_string(),
            }),
            RunError::Io { path, source } => serde_json::json!({
                "error": "io",
                "path": path.display().to_string(),
                "message": source.to_string(),
            }),
        };
        value.to_string()
    }
}
