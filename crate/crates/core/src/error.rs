//! Crate-wide error type. Everything fallible returns `Result<T>`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition (bad argument, range, shape).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Configuration file problems: parse failures, unknown keys, bad values.
    /// The message names the offending key where possible.
    #[error("config error: {0}")]
    Config(String),

    /// Rough-edge synthesis produced a non-positive gap somewhere along the line:
    /// the requested roughness is unphysical for the given spacing.
    #[error("edge collision: min gap {min_gap:.3e} m at segment {segment} (spacing {spacing:.3e} m)")]
    EdgeCollision {
        min_gap: f64,
        segment: usize,
        spacing: f64,
    },

    /// The mixture decomposition left [0, 1]; the marginal cannot contain
    /// the stated authentic share. Only raised by the strict entry point.
    #[error("inconsistent mixture: conditional pass probability {0:.6} outside [0, 1]")]
    InconsistentMixture(f64),

    /// Two traces / a trace and a card disagree on the offset-capacitance grid.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Authentication card file is malformed or from an unsupported schema.
    #[error("card format: {0}")]
    CardFormat(String),

    /// A pipeline stage failed; the run manifest records partial outputs.
    #[error("stage '{stage}' failed: {message}")]
    Stage { stage: String, message: String },

    /// Filesystem failure, annotated with the path involved.
    #[error("io error at {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
