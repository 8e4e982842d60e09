//! Command-line harness, CSV reports, run files and rayon-parallel replica
//! estimation on top of `ipsdual-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod draws;
pub mod parallel;
pub mod report;

pub use ipsdual_core as core;

/// Failure of a harness run.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ipsdual_core::error::Error),
    #[error("run file: {0}")]
    Config(String),
    #[error("run spec: {0}")]
    Spec(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Short machine-readable class of the failure.
    pub fn kind(&self) -> String {
        match self {
            CliError::Core(e) => {
                let dbg = format!("{e:?}");
                let name = dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Core").to_string();
                format!("core.{name}")
            }
            CliError::Config(_) => "config".into(),
            CliError::Spec(_) => "spec".into(),
            CliError::Io(_) => "io".into(),
            CliError::Csv(_) => "csv".into(),
        }
    }

    /// JSON error record for stderr.
    pub fn record(&self, command: &str) -> serde_json::Value {
        serde_json::json!({ "error": self.kind(), "command": command, "message": self.to_string() })
    }
}
