use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every stage of the pipeline.
///
/// The variants split along the CLI's exit-code boundary: [`Error::is_user_error`]
/// separates configuration/input mistakes from numerical or runtime failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("CFL condition violated at cell (row {row}, col {col}): courant number {courant:.4} with wave speed {speed:.4} m/s")]
    Cfl {
        row: usize,
        col: usize,
        courant: f64,
        speed: f64,
    },

    #[error("non-finite value in {stage}: {detail}")]
    NonFinite { stage: String, detail: String },

    #[error("misaligned cadence: {0}")]
    Alignment(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("png encoding error: {0}")]
    Png(#[from] png::EncodingError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    /// True for mistakes in configuration or inputs (CLI exit code 2);
    /// false for numerical aborts and runtime failures (exit code 3).
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Input(_)
            | Error::Alignment(_)
            | Error::Format { .. }
            | Error::Json(_) => true,
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Shape(_) | Error::Cfl { .. } | Error::NonFinite { .. } | Error::Png(_) => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
