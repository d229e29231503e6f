//! Std side of the emulator: configuration and trace files, metric export,
//! real-time UDP emission and the benchmark harness behind the `cv2x` binary.

pub mod bench;
pub mod bler;
pub mod config;
pub mod error;
pub mod export;
pub mod hil;
pub mod mem;
pub mod run;
pub mod trace;

pub use config::{PacingConfig, RunConfig};
pub use error::{Error, Result};
