use std::path::PathBuf;

use ghd_core::GhdError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("invalid config: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A diagnostic ran but exceeded its tolerance.
    #[error("tolerance exceeded: {0}")]
    Tolerance(String),

    #[error(transparent)]
    Core(#[from] GhdError),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    /// 0 ok, 1 I/O or internal, 2 config, 3 assumption, 4 convergence,
    /// 5 diagnostic tolerance.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema { .. } | CliError::Invalid(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Tolerance(_) => 5,
            CliError::Core(e) => match e {
                GhdError::Config(_) | GhdError::Cfl { .. } | GhdError::Window(_) => 2,
                GhdError::Assumption { .. } => 3,
                GhdError::Convergence { .. } => 4,
                GhdError::Diagnostic(_) => 5,
                GhdError::Numerical(_) | GhdError::Range(_) | GhdError::Io(_) | GhdError::Csv(_) => 1,
            },
        }
    }
}
