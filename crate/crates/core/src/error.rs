use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input is outside the domain of the operation.
    #[error("{op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// The layer stack or cross-section is not shaped the way the operation needs.
    #[error("malformed structure: {0}")]
    Structure(String),

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Eigen { iterations: usize, residual: f64 },

    #[error("guided mode lost at wavelength {wavelength_nm} nm; reduce the finite-difference step")]
    ModeLost { wavelength_nm: f64 },

    #[error("g2 fit failed: {0}")]
    Fit(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid time-tag data: {0}")]
    Format(String),

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Wraps the error with the module/operation that raised it.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }
}
