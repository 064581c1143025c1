//! Error types shared across the crate.

use std::path::PathBuf;

/// Errors produced by the physics, dataset, frame-processing, estimator, and
/// evaluation layers.
///
/// The variants are grouped so a caller can classify failures without string
/// matching: `Domain` covers rejected input values, `Format` covers on-disk
/// artifacts that fail to parse or validate, and the remaining variants carry
/// operation-specific diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input value violates a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// An on-disk artifact (manifest, sidecar, checkpoint, image) is
    /// malformed or inconsistent.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// A dataset or model file declares an unsupported format version.
    #[error("version mismatch in {path}: found {found}, supported {supported}")]
    VersionMismatch {
        path: PathBuf,
        found: String,
        supported: String,
    },

    /// A file ended before the declared payload was complete.
    #[error("truncated file {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    /// A loaded record violates a type invariant.
    #[error("invariant violation in record {record}: {reason}")]
    InvariantViolation { record: usize, reason: String },

    /// DCSN rectification produced a negative variance, signalling a bad
    /// session (the readout-noise fit is wider than the dark-frame fit).
    #[error(
        "negative variance rectifying dark-frame fit: sigma_dcsn {sigma_dcsn} < sigma_rn {sigma_rn}"
    )]
    NegativeVariance { sigma_dcsn: f64, sigma_rn: f64 },

    /// A distribution fit could not proceed (for example an all-zero frame).
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at step {step}: loss {loss}")]
    TrainingDiverged { step: usize, loss: f64 },

    /// A frame-processing failure annotated with the session pair it came from.
    #[error("session pair {pair}: {source}")]
    SessionPair {
        pair: usize,
        #[source]
        source: Box<Error>,
    },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Error bubbled up from the tensor engine.
    #[error(transparent)]
    Graph(#[from] camnoise_tensor::GraphError),

    /// Error bubbled up from checkpoint serialization.
    #[error(transparent)]
    Checkpoint(#[from] camnoise_tensor::CheckpointError),
}

impl Error {
    /// Convenience constructor for [`Error::Domain`].
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Convenience constructor for [`Error::Io`].
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Convenience constructor for [`Error::Format`].
    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
