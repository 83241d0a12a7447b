use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, NsvError>;

#[derive(Debug, Error)]
pub enum NsvError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("decode error at byte offset {offset}: {message}")]
    Decode { offset: u64, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("empty clip: {0}")]
    EmptyClip(String),
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient data: need {required}, have {available}")]
    InsufficientData { required: usize, available: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("text parse error at character {position}: {message}")]
    TextParse { position: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unit index {index} out of range [0, {limit})")]
    Range { index: usize, limit: usize },
    #[error("training diverged at step {step}: {message}")]
    Divergence { step: usize, message: String },
    #[error("unknown speaker {speaker}; valid ids: {}", valid.join(","))]
    UnknownSpeaker { speaker: String, valid: Vec<String> },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<NsvError>,
    },
}

impl NsvError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            NsvError::NotFound(path)
        } else {
            NsvError::Io { path, source }
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        NsvError::InvalidArgument(msg.into())
    }

    /// Wraps the error with a context string such as an utterance id.
    pub fn context(self, context: impl Into<String>) -> Self {
        NsvError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Stable machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            NsvError::Io { .. } => "io",
            NsvError::NotFound(_) => "not-found",
            NsvError::Decode { .. } => "decode",
            NsvError::UnsupportedFormat(_) => "unsupported-format",
            NsvError::EmptyClip(_) => "empty-clip",
            NsvError::EmptyCorpus(_) => "empty-corpus",
            NsvError::InvalidArgument(_) => "invalid-argument",
            NsvError::InsufficientData { .. } => "insufficient-data",
            NsvError::Parse { .. } => "parse",
            NsvError::TextParse { .. } => "text-parse",
            NsvError::Validation(_) => "validation",
            NsvError::Range { .. } => "range",
            NsvError::Divergence { .. } => "divergence",
            NsvError::UnknownSpeaker { .. } => "unknown-speaker",
            NsvError::Context { source, .. } => source.kind(),
        }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &NsvError {
        match self {
            NsvError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context(self, ctx: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, ctx: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.context(ctx()))
    }
}
