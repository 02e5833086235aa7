//! Crate-wide error type.

/// Errors produced by dataset construction, label building, loss evaluation,
/// the network, training, and checkpoint I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A generator or mixture spec failed validation.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Vector or matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A class index fell outside `[0, num_classes)`.
    #[error("class index {index} out of range for {num_classes} classes")]
    ClassOutOfRange { index: usize, num_classes: usize },
    /// A subsample request asked for more samples of a class than exist.
    #[error("insufficient samples for class {class}: requested {requested}, available {available}")]
    InsufficientSamples {
        class: usize,
        requested: usize,
        available: usize,
    },
    /// A numeric input that must be finite was not.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// CSV parse failure. `line` is 1-based and counts the header line.
    #[error("{path}:{line}: {message}")]
    CsvParse {
        path: String,
        line: usize,
        message: String,
    },
    /// A checkpoint file did not match the documented format.
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    /// Training produced a non-finite loss and was aborted.
    #[error("non-finite loss at epoch {epoch}, batch {batch} (lr {lr}); aborting")]
    NonFiniteLoss { epoch: usize, batch: usize, lr: f64 },
    /// A training failure while evaluating one alpha candidate.
    #[error("alpha {alpha}: {source}")]
    AlphaCandidate {
        alpha: f64,
        #[source]
        source: Box<Error>,
    },
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
