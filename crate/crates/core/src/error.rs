use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series truncation at kmax = {kmax} leaves tail bound {bound:e} above tolerance {tol:e}")]
    SeriesTolerance { kmax: usize, bound: f64, tol: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("enumeration cap exceeded: {what} = {value} > {cap}")]
    CapExceeded { what: &'static str, value: usize, cap: usize },

    #[error("exact integer overflow computing {0}")]
    Overflow(String),

    #[error("particle label {label} out of range 1..={n}")]
    LabelOutOfRange { label: u32, n: usize },

    #[error("could not place particle {index} after {attempts} attempts")]
    Placement { index: usize, attempts: usize },

    #[error("outgoing configuration: (v - v1)·omega = {0:e} <= 0")]
    Outgoing(f64),

    #[error("simulation fault at t = {time}: {reason}")]
    Fault { time: f64, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }
}
