use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown node id {0}")]
    UnknownNode(u32),
    #[error("self-loop on node {0} rejected")]
    SelfLoop(u32),
    #[error("invalid meta-path schema: {0}")]
    Schema(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("node sets differ; offending nodes: {}", .0.join(", "))]
    NodeSetMismatch(Vec<String>),
    #[error("training data has a single class")]
    SingleClass,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("stage `{stage}` failed: {source}\n  replay with: {replay}")]
    Stage {
        stage: String,
        replay: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// False only for failures raised while a pipeline stage was running.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Stage { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
