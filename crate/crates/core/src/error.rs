use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a RIFF/WAVE file: {0}")]
    NotWav(String),
    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("signal too short: need {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },
    #[error("signal shorter than the {needed}-sample silence window (got {got})")]
    TooShort { needed: usize, got: usize },
    #[error("leading silence window is constant; standard deviation is zero")]
    DegenerateSilence,
    #[error("no voiced content detected")]
    NoVoicedContent,
    #[error("filterbank too dense: filter {filter} of {count} covers no FFT bin")]
    FilterbankTooDense { filter: usize, count: usize },
    #[error("autocorrelation lag 0 must be positive, got {0}")]
    InvalidAutocorrelation(f64),
    #[error("unstable recursion at order {order}: reflection coefficient {reflection}")]
    UnstableRecursion { order: usize, reflection: f64 },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("perplexity {perplexity} unreachable for row {row}")]
    PerplexityUnreachable { row: usize, perplexity: f64 },
    #[error("cost became non-finite at iteration {iteration}")]
    NonFiniteCost { iteration: usize },
    #[error("k = {k} exceeds the {n} training points")]
    KTooLarge { k: usize, n: usize },
    #[error("SMO did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("ROC undefined for speaker {speaker}: {reason}")]
    UndefinedRoc { speaker: usize, reason: &'static str },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
