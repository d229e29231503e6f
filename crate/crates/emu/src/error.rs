use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: u64, msg: String },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cv2x_core::Error),
    #[error("real-time violation: emission lag {lag_ms:.1} ms at subframe {subframe} exceeded {max_lag_ms} ms for {window_ms} ms of simulated time")]
    RealTime {
        subframe: u64,
        lag_ms: f64,
        max_lag_ms: f64,
        window_ms: u64,
    },
    #[error("network: {0}")]
    Net(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
