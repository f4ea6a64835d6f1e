use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("reweighting mode `{0}` requires a reweighting tensor")]
    MissingReweight(&'static str),

    #[error("invalid argument: {0}")]
    Domain(String),

    /// Dense N x N materialization refused without an explicit override.
    #[error("dense path refused for N = {n} (limit {limit}); pass --allow-large to force")]
    TooLarge { n: usize, limit: usize },

    /// Imaginary part left after an inverse transform of real data exceeded tolerance.
    #[error("spectral residue {residue:e} exceeds tolerance {tolerance:e}")]
    SpectralResidue { residue: f64, tolerance: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
