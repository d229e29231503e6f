//! Allocation-only core of a real-time C-V2X mode 4 sidelink emulator.
//!
//! Everything in here is deterministic and IO-free: radio grid geometry,
//! path loss and shadowing, the sensing-based semi-persistent scheduler,
//! the batch SINR receiver model, the constant-velocity scenario generator,
//! the BSM event engine and the metric accumulators. File formats, sockets
//! and wall-clock pacing live in the `cv2x-emu` companion crate.
//!
//! The engine reproduces the behaviour of N vehicles from the point of view
//! of one host vehicle (HV). Remote vehicles (RVs) run the full MAC, but
//! only keep the MAC-level sensing quantities from their receptions.

#![no_std]

extern crate alloc;

pub mod channel;
pub mod engine;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod mobility;
pub mod params;
pub mod phy;
pub mod rng;
pub mod sbsps;
pub mod units;

pub use engine::{Engine, HvReception};
pub use error::{Error, Result};
pub use grid::{Csr, SelectionWindow};
pub use metrics::{MetricsCollector, MetricsReport};
pub use params::{Bandwidth, ChannelModelKind, SimParams, SinrCombining};
