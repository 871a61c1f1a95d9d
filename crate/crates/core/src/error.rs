use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid station table: {0}")]
    InvalidStations(String),

    #[error("neighbor count k = {k} out of range for {n} nodes (need 1 <= k < n)")]
    NeighborCountOutOfRange { k: usize, n: usize },

    #[error("bandwidth F = {f} out of range for {n} nodes (need 1 <= F <= n)")]
    BandwidthOutOfRange { f: usize, n: usize },

    #[error("sampling set size {m} out of range (need {min} <= m <= {max})")]
    SampleSizeOutOfRange { m: usize, min: usize, max: usize },

    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("symmetric eigensolver did not converge on a {0}x{0} matrix")]
    EigenNoConvergence(usize),

    #[error("sampling set is not recoverable (lambda_min = {lambda_min:e})")]
    NotRecoverable { lambda_min: f64 },

    #[error("no recoverable random sampling set of size {m} after {attempts} attempts")]
    RandomSamplingFailed { m: usize, attempts: usize },

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step size mu = {mu} is unstable (spectral radius {radius} >= 1)")]
    UnstableStep { mu: f64, radius: f64 },

    #[error("MSD value {0} has no decibel representation")]
    NonPositiveMsd(f64),

    #[error("configuration invalid:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short category name, also used to pick the process exit code.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::Json(_) => "config",
            Error::Parse { .. } | Error::Csv(_) | Error::InvalidStations(_) => "input",
            Error::Io(_) => "io",
            Error::EigenNoConvergence(_) => "numerics",
            _ => "model",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "input" => 3,
            "io" => 4,
            "numerics" => 5,
            _ => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
