use std::path::PathBuf;

use captrade_core::verify::VerifyFailure;
use captrade_core::Error as CoreError;
use serde_json::json;

/// Process exit codes. These are part of the command-line contract.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const CLEARING: i32 = 3;
    pub const VERIFICATION: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Validation(CoreError),
    #[error("{0}")]
    Clearing(CoreError),
    #[error("verification failed: {} ({}) value={}", .0.check, .0.params, .0.value)]
    Verification(VerifyFailure),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NoClearing { .. } => CliError::Clearing(e),
            CoreError::Validation { .. } => CliError::Validation(e),
        }
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Csv { .. } => exit::IO,
            CliError::Parse { .. } | CliError::Validation(_) => exit::VALIDATION,
            CliError::Clearing(_) => exit::CLEARING,
            CliError::Verification(_) => exit::VERIFICATION,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } | CliError::Csv { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Validation(_) => "validation",
            CliError::Clearing(_) => "clearing",
            CliError::Verification(_) => "verification",
        }
    }

    /// Single-line JSON description written to standard error.
    pub fn machine_line(&self) -> String {
        let mut obj = json!({
            "error": self.kind(),
            "code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Validation(e) => {
                obj["field"] = json!(e.field());
            }
            CliError::Parse { line, column, .. } => {
                obj["line"] = json!(line);
                obj["column"] = json!(column);
            }
            CliError::Verification(f) => {
                obj["check"] = json!(f.check);
                obj["params"] = json!({
                    "k": f.params.k,
                    "a": f.params.a,
                    "b": f.params.b,
                    "allowance": f.params.allowance,
                });
            }
            _ => {}
        }
        obj.to_string()
    }
}
