//! Error type shared by all modules.

use thiserror::Error;

/// Errors surfaced by the library.
///
/// `Config` maps to CLI exit code 2, `Domain` to 2 as well (bad inputs),
/// and `Numerical` to exit code 3 (a diagnostic from an otherwise valid
/// configuration).
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed configuration: unknown names, inconsistent shapes, bad flags.
    #[error("config error: {0}")]
    Config(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed to converge or lost validity.
    #[error("numerical diagnostic: {0}")]
    Numerical(String),

    /// Filesystem or serialization failure in the harness.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration/domain problems,
    /// 3 for numerical diagnostics, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Numerical(_) => 3,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}
