use std::path::PathBuf;

/// Errors produced anywhere in the fitting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("duplicate sample for trial {trial_id}, pedestrian {pedestrian_id} at t = {t}")]
    DuplicateSample {
        trial_id: String,
        pedestrian_id: String,
        t: f64,
    },
    #[error("no trials in input")]
    NoTrials,
    #[error("invalid trial {trial_id}: {message}")]
    InvalidTrial { trial_id: String, message: String },
    #[error("no pedestrian has a sample near t = {t}")]
    EmptyFrame { t: f64 },
    #[error("group {group} is empty")]
    GroupEmpty { group: u8 },
    #[error("invalid direction vector ({0}, {1})")]
    InvalidDirection(f64, f64),
    #[error("degenerate motion: {0}")]
    DegenerateMotion(String),
    #[error("groups never overlap: no crossing window")]
    NoCrossing,
    #[error("degenerate frame: diameter {diameter} m")]
    DegenerateFrame { diameter: f64 },

    #[error("invalid cutoff {cutoff_hz} Hz for sampling rate {fs_hz} Hz")]
    InvalidCutoff { cutoff_hz: f64, fs_hz: f64 },
    #[error("unsupported filter order {0}")]
    UnsupportedOrder(usize),
    #[error("series of length {len} is too short, need at least {min}")]
    ShortSeries { len: usize, min: usize },

    #[error("invalid wavelength {0}")]
    InvalidWavelength(f64),

    #[error("objective is not finite at {0:?}")]
    NonFiniteObjective(Vec<f64>),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("grid of {0} points exceeds the limit")]
    GridTooLarge(u128),

    #[error("insufficient sample size: {0}")]
    SampleSize(String),
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("incomplete strategy table: {0}")]
    IncompleteTable(String),

    #[error("cannot place any stripe center within an extent of {extent_m} m")]
    EmptyGeneration { extent_m: f64 },

    #[error("all {0} batch rows failed")]
    BatchFailed(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
