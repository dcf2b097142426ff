use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("row {row}: cannot parse {value:?} as a number")]
    Parse { row: usize, value: String },
    #[error("column {0} not found")]
    MissingColumn(String),
    #[error("selected column contains no values")]
    EmptyColumn,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("series too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series has zero variance")]
    ConstantSeries,
    #[error("unsupported significance level {0} (supported: 0.05, 0.1)")]
    UnsupportedRho(f64),
    #[error("{requested} noise-free bins requested but only {} available: {bins:?}", bins.len())]
    NotEnoughNoiseFree { requested: usize, bins: Vec<usize> },
    #[error("angular frequency {0} is not on the DFT grid")]
    OffGrid(f64),
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),
    #[error("autocorrelation never dropped below {threshold:.4} within {max_lag} lags")]
    DelayNotFound { threshold: f64, max_lag: usize },
    #[error("too few valid neighbor pairs ({0})")]
    TooFewPairs(usize),
    #[error("{excluded} of {total} surrogates gave unreliable estimates")]
    TooManyUnreliable { excluded: usize, total: usize },
    #[error("tangent vectors overflowed near t = {t}; use a smaller renormalization interval")]
    TangentOverflow { t: f64 },
    #[error("trajectory diverged near t = {t}")]
    Diverged { t: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
