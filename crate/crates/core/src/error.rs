use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has zero L2 norm")]
    ZeroVector,
    #[error("length {0} is not a supported power of two")]
    BadLength(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid qubit set {remove:?} for a {n_qubits}-qubit state")]
    BadQubitSet { remove: Vec<usize>, n_qubits: usize },
    #[error("invalid gate: {0}")]
    BadGate(String),
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("depth {depth} outside 1..={max}")]
    BadDepth { depth: usize, max: usize },
    #[error("fade-in weight {0} outside [0, 1]")]
    BadAlpha(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty batch")]
    EmptyBatch,
    #[error("negative squared norm {0}")]
    NegativeNorm(f64),
    #[error("alignment does not cover the window {start}..={end} (reference has {available} positions)")]
    WindowNotCovered {
        start: usize,
        end: usize,
        available: usize,
    },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{0} mutated and neighboring loci exceed the 1024 slots")]
    TooManyMutations(usize),
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures caused by numerical breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}
