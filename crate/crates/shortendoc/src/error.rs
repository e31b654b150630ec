//! Crate-wide error type.

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors from compression, scoring backends, and dataset handling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Ratio arithmetic over an original docstring with zero tokens.
    #[error("empty original")]
    EmptyOriginal,

    /// The compressed sequence is longer than the original.
    #[error("not a compression: compressed {compressed} > original {original}")]
    NotACompression { original: usize, compressed: usize },

    /// Candidate positions fall outside the sequence or repeat.
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),

    /// Vectors of different dimensions were compared.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// A zero-norm vector has no direction to compare.
    #[error("degenerate vector")]
    DegenerateVector,

    /// An operation that needs at least one token got none.
    #[error("empty sequence")]
    EmptySequence,

    /// The candidate search has no positions to work over.
    #[error("nothing to compress")]
    NothingToCompress,

    /// Token ids and surface pieces disagree in length.
    #[error("token ids and surfaces differ in length: {ids} vs {surfaces}")]
    LengthMismatch { ids: usize, surfaces: usize },

    /// A prompt failed structural validation.
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),

    /// Configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A scoring backend call failed.
    #[error("backend error at {endpoint}: {message}")]
    Backend { endpoint: String, message: String },

    /// Stop-word removal failed while gating one word.
    #[error("stop-word gate failed at word {position}: {source}")]
    StopWordGate {
        position: usize,
        #[source]
        source: Box<Error>,
    },

    /// A compression stage failed.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    /// The final output failed constraint re-verification.
    #[error("constraint violated: final similarity {similarity} below tau {tau}")]
    ConstraintViolated { similarity: f64, tau: f64 },

    /// Prompt parsing found no function header.
    #[error("no signature")]
    NoSignature,

    /// Prompt parsing found an unterminated triple quote.
    #[error("malformed docstring")]
    MalformedDocstring,

    /// A dataset or results line failed to parse.
    #[error("malformed line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    /// Two dataset records share a task id.
    #[error("duplicate task_id {0:?}")]
    DuplicateTaskId(String),

    /// File I/O failed.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Tag an error with the pipeline stage it came from.
    pub(crate) fn stage(stage: &'static str, source: Error) -> Error {
        Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Build a backend error for one wire endpoint.
    pub(crate) fn backend(endpoint: impl Into<String>, message: impl ToString) -> Error {
        Error::Backend {
            endpoint: endpoint.into(),
            message: message.to_string(),
        }
    }
}
