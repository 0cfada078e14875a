use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("valence error: atom {atom} ({element}) uses {used} > {max}")]
    Valence {
        atom: usize,
        element: String,
        used: u32,
        max: u32,
    },

    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),

    #[error("invalid molecule: {0}")]
    InvalidGraph(String),

    #[error("decomposition error: {0}")]
    Decomposition(String),

    #[error("cluster `{0}` is not in the vocabulary")]
    OovCluster(String),

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("no valid candidate attachments at tree node {0}")]
    EmptyCandidates(usize),

    #[error("assembly failed after {0} backtracking retries")]
    AssemblyFailed(usize),

    #[error("ground-truth attachment missing from candidates at tree node {0}")]
    GroundTruthNotInCandidates(usize),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Strips any line annotation and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLine { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn at_line(self, line: usize) -> Error {
        Error::AtLine {
            line,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
