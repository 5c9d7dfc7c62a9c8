//! Config-driven runner for the radial NLS laboratory.

use std::path::{Path, PathBuf};

pub mod config;
pub mod emit;
pub mod run;

pub use config::{Command, ConfigError, RunConfig, ARTIFACT_VERSION};
pub use run::{execute, Summary};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const DIVERGENCE: i32 = 3;
    pub const BUDGET: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] radial_nls::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("conservation check failed: relative {observable} drift {drift:e} exceeds {tolerance:e}")]
    Conservation {
        observable: String,
        drift: f64,
        tolerance: f64,
    },
}

impl RunError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use radial_nls::Error as E;
        match self {
            RunError::Config(ConfigError::Read { .. }) | RunError::Io { .. } => exit::IO,
            RunError::Config(_) => exit::VALIDATION,
            RunError::Conservation { .. } => exit::DIVERGENCE,
            RunError::Model(e) => match e {
                E::Domain(_) | E::Aliasing { .. } | E::DimensionMismatch { .. } => exit::VALIDATION,
                E::Divergence { .. } | E::WindowTooLarge { .. } => exit::DIVERGENCE,
                E::Budget { .. } => exit::BUDGET,
                E::Checkpoint(_) | E::Io(_) => exit::IO,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        use radial_nls::Error as E;
        match self {
            RunError::Config(ConfigError::Read { .. }) => "io",
            RunError::Config(ConfigError::Parse { .. }) => "parse",
            RunError::Config(ConfigError::Invalid(_)) => "validation",
            RunError::Io { .. } => "io",
            RunError::Conservation { .. } => "conservation",
            RunError::Model(e) => match e {
                E::Domain(_) => "domain",
                E::Aliasing { .. } => "aliasing",
                E::DimensionMismatch { .. } => "dimension-mismatch",
                E::Divergence { .. } => "divergence",
                E::WindowTooLarge { .. } => "window-too-large",
                E::Budget { .. } => "budget",
                E::Checkpoint(_) => "checkpoint",
                E::Io(_) => "io",
            },
        }
    }

    /// Machine-readable failure report.
    pub fn report(&self, command: Option<Command>, config_hash: Option<&str>) -> serde_json::Value {
        let mut error = serde_json::json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let RunError::Model(radial_nls::Error::Divergence { time, .. }) = self {
            error["time"] = serde_json::json!(time);
        }
        serde_json::json!({
            "artifact_version": ARTIFACT_VERSION,
            "command": command,
            "config_hash": config_hash,
            "status": "error",
            "error": error,
        })
    }
}
