use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("{0}")]
    Invariant(String),

    #[error("vertical velocity at p0 is {w_top:e}, exceeds compatibility tolerance {tol:e} (missing or failed barotropic projection)")]
    Compatibility { w_top: f64, tol: f64 },

    #[error("elliptic solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("non-finite value in field `{field}` at step {step}")]
    NonFinite { field: String, step: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0} already exists (pass --overwrite to replace)")]
    Exists(PathBuf),

    #[error("malformed snapshot {path}: {msg}")]
    Snapshot { path: PathBuf, msg: String },

    #[error("diagnostics series too short: {0} records, need at least 3")]
    SeriesTooShort(usize),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for faults raised while integrating (as opposed to bad input).
    pub fn is_runtime_fault(&self) -> bool {
        matches!(
            self,
            Error::Compatibility { .. } | Error::NonConvergence { .. } | Error::NonFinite { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
