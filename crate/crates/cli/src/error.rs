use std::fmt;

/// Failure of a run, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// Exit code 2.
    Config { field: String, reason: String },
    /// Exit code 3.
    Numeric { reason: String },
    /// Exit code 1; I/O on the output directory.
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        RunError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Numeric { .. } => 3,
            RunError::Io(_) => 1,
        }
    }

    /// Single-line JSON description for stderr.
    pub fn to_line(&self) -> String {
        let value = match self {
            RunError::Config { field, reason } => serde_json::json!({"code": "config", "field": field, "reason": reason}),
            RunError::Numeric { reason } => serde_json::json!({"code": "numeric", "reason": reason}),
            RunError::Io(e) => serde_json::json!({"code": "io", "reason": e.to_string()}),
        };
        value.to_string()
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

impl From<lattice_pdo::Error> for RunError {
    fn from(e: lattice_pdo::Error) -> Self {
        match e {
            lattice_pdo::Error::InvalidParameter { field, reason } => RunError::config(format!("params.{field}"), reason),
            other => RunError::Numeric { reason: other.to_string() },
        }
    }
}
