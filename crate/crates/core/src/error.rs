use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by how the CLI reports them: configuration problems
/// exit with 1, data problems with 2, numerical divergence with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing dataset file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}:{line}: malformed triple line (expected e1<TAB>relation<TAB>e2): {text:?}", path.display())]
    MalformedLine {
        path: PathBuf,
        line: usize,
        text: String,
    },

    #[error("training split is empty: {}", .0.display())]
    EmptyTrain(PathBuf),

    #[error("checkpoint does not match dataset: {0}")]
    VocabMismatch(String),

    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code class used by the CLI: 1 config, 2 data, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Divergence(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
