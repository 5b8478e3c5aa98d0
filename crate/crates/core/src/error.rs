use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("average update needs period t >= 2, got {0}")]
    InvalidPeriod(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("potential gradient normalizer underflowed")]
    ZeroGradient,
    #[error("integration stalled near t = {t}")]
    StalledIntegration { t: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown catalog game '{0}'")]
    UnknownGame(String),
    #[error("game too large for {op}: {rows}x{cols}")]
    OversizedGame {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("linear program: {0}")]
    Lp(String),
    #[error("trajectory has no per-period records")]
    MissingRecords,
    #[error("tail has only {0} snapshots, need at least 20")]
    TailTooShort(usize),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
