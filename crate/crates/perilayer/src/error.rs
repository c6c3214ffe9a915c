//! Error type shared by every stage of the pipeline.

use thiserror::Error;

/// Errors raised by the library. Each variant names the failing stage so that
/// the command-line front end can map it to an exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid geometric input (hole outside the cell, source touching the layer, ...).
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Invalid configuration value or inconsistent parameter combination.
    #[error("config error: {0}")]
    Config(String),
    /// Mesh generation failed or produced an invalid mesh.
    #[error("mesh error: {0}")]
    Mesh(String),
    /// Finite-element assembly failed (degenerate element, unknown tag, ...).
    #[error("assembly error: {0}")]
    Assembly(String),
    /// The linear solver failed. `residuals` holds the iteration history when available.
    #[error("solver error: {message}")]
    Solver {
        message: String,
        residuals: Vec<f64>,
    },
    /// A consistency check on computed data failed.
    #[error("inconsistency: {0}")]
    Inconsistency(String),
    /// Generic numerical failure (resonant exponent, empty region, failed fit, ...).
    #[error("numerical error: {0}")]
    Numerical(String),
    /// Input/output failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that stem from user input rather than from a computation.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Geometry(_) | Error::Config(_))
    }
}
