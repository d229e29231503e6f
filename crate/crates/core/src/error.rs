use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("distance {0} m is outside the path loss domain")]
    Domain(f64),
    #[error("time {t_ms} ms outside track extent [{start_ms}, {end_ms}] of vehicle {vehicle_id}")]
    Extrapolation {
        vehicle_id: u32,
        t_ms: i64,
        start_ms: i64,
        end_ms: i64,
    },
    #[error("scheduler invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}
