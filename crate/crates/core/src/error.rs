use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or inconsistent configuration (grid, aperture, schedule, scenario).
    #[error("configuration error: {0}")]
    Config(String),

    /// Probability reached the edge of the grid during a run.
    #[error("grid too small: boundary occupation {occupation:.3e} exceeds {threshold:.1e} at t = {time}")]
    GridTooSmall {
        time: f64,
        occupation: f64,
        threshold: f64,
    },

    /// The main density maximum sits on the first or last site.
    #[error("peak at boundary site {site}")]
    PeakAtBoundary { site: i64 },

    #[error("peak tracking lost at snapshot {snapshot} (last good index {last_good})")]
    TrackingLost { snapshot: usize, last_good: usize },

    #[error("momentum density is multimodal; candidate peaks at k = {candidates:?}")]
    AmbiguousMomentumPeak { candidates: Vec<f64> },

    #[error("refractive index diverges: J0({k0}) = {value:.3e}")]
    Divergence { k0: f64, value: f64 },

    /// Something that cannot happen for a correctly built Hamiltonian.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
