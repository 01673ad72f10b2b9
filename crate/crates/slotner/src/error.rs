use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes or lengths that do not line up (matrix products, tag/token
    /// alignment, state widths).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An operation received an input it defines no result for (empty corpus,
    /// empty word, zero-length utterance).
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A text input failed to parse. `line` is 1-based.
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A corpus file with one or more invalid records; every offending line
    /// is listed.
    #[error("invalid corpus {path}:\n{}", problems.join("\n"))]
    CorpusInvalid {
        path: PathBuf,
        problems: Vec<String>,
    },

    /// A tag string that is not `O`, `B-<type>` or `I-<type>`.
    #[error("unparseable label {0:?} (expected O, B-<type> or I-<type>)")]
    Label(String),

    /// Bad or inconsistent configuration values.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Model and corpus disagree on the label inventory.
    #[error("label set mismatch: {0}")]
    LabelSetMismatch(String),

    /// Unreadable or truncated checkpoint container.
    #[error("corrupt checkpoint: {0}")]
    CheckpointCorrupt(String),

    /// Checkpoint written by an unsupported format version.
    #[error("unsupported checkpoint version {found} (supported: {supported})")]
    CheckpointVersion { found: String, supported: u32 },

    /// Tensor directory does not match the variant's parameter inventory.
    #[error("checkpoint inventory mismatch: {0}")]
    CheckpointInventory(String),

    /// Stored tensor shape differs from the shape the variant requires.
    #[error("checkpoint shape mismatch for {tensor}: expected {expected:?}, found {found:?}")]
    CheckpointShape {
        tensor: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    /// Underlying filesystem failure, annotated with the path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the machine rather than of the input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
