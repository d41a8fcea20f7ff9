use std::path::PathBuf;

use serde::Serialize;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const NOT_CONVERGED: i32 = 2;
    pub const VERIFICATION: i32 = 3;
    pub const CONFIG: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("csv export: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] brach_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use brach_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Toml { .. } => exit::CONFIG,
            CliError::NotConverged(_) => exit::NOT_CONVERGED,
            CliError::Verification(_) => exit::VERIFICATION,
            CliError::Io { .. } | CliError::Json { .. } | CliError::Csv(_) => exit::IO,
            CliError::Core(e) => match e {
                E::NotConverged { .. } | E::SeedNotConverged | E::StepLimit { .. } | E::Divergence { .. } => {
                    exit::NOT_CONVERGED
                }
                E::Inconsistent { .. } => exit::VERIFICATION,
                _ => exit::CONFIG,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::NotConverged(_) => "not_converged",
            CliError::Verification(_) => "verification",
            CliError::Io { .. } => "io",
            CliError::Json { .. } => "json",
            CliError::Toml { .. } => "toml",
            CliError::Csv(_) => "csv",
            CliError::Core(_) => "core",
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Record { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() })
            .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind()))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
