//! Run-wide simulation parameters. Defaults follow the reference
//! evaluation setup (190 B BSMs at 10 Hz, MCS 5, 20 dBm, 100 ms RRI,
//! SLRRC in [5, 15], P_resel = 0.8, 40 s runs).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel bandwidth. Only the two sidelink bandwidths are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Bandwidth {
    Mhz10,
    Mhz20,
}

impl Bandwidth {
    pub fn mhz(self) -> u32 {
        match self {
            Bandwidth::Mhz10 => 10,
            Bandwidth::Mhz20 => 20,
        }
    }

    /// Resource blocks in the LTE numerology for this bandwidth.
    pub fn total_rbs(self) -> u32 {
        match self {
            Bandwidth::Mhz10 => 50,
            Bandwidth::Mhz20 => 100,
        }
    }
}

impl TryFrom<u32> for Bandwidth {
    type Error = Error;

    fn try_from(mhz: u32) -> Result<Self> {
        match mhz {
            10 => Ok(Bandwidth::Mhz10),
            20 => Ok(Bandwidth::Mhz20),
            other => Err(Error::config(alloc::format!(
                "bandwidth must be 10 or 20 MHz, got {other}"
            ))),
        }
    }
}

impl From<Bandwidth> for u32 {
    fn from(bw: Bandwidth) -> u32 {
        bw.mhz()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModelKind {
    Fowlerville,
    WinnerB1,
}

impl ChannelModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelModelKind::Fowlerville => "fowlerville",
            ChannelModelKind::WinnerB1 => "winner_b1",
        }
    }
}

/// How per-subchannel SINRs are folded into one packet SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinrCombining {
    LinearMean,
    #[default]
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub bandwidth_mhz: Bandwidth,
    pub packet_size_bytes: u32,
    pub mcs: u32,
    pub tx_rate_hz: u32,
    pub tx_power_dbm: f64,
    pub rri_ms: u32,
    pub slrrc_min: u32,
    pub slrrc_max: u32,
    pub p_resel: f64,
    pub sim_duration_ms: u64,
    pub rbs_per_subchannel: u32,
    /// Subchannels occupied by one transmission.
    pub packet_subchannels: u32,
    pub noise_figure_db: f64,
    pub channel_model: ChannelModelKind,
    pub rng_seed: u64,
    /// Initial RSRP exclusion threshold of the scheduler.
    pub sps_threshold_dbm: f64,
    pub sensing_window_ms: u32,
    pub sinr_combining: SinrCombining,
    /// Traffic runs this long before the measured interval `[0,
    /// sim_duration_ms)`; nothing received during it is recorded.
    pub warmup_ms: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            bandwidth_mhz: Bandwidth::Mhz10,
            packet_size_bytes: 190,
            mcs: 5,
            tx_rate_hz: 10,
            tx_power_dbm: 20.0,
            rri_ms: 100,
            slrrc_min: 5,
            slrrc_max: 15,
            p_resel: 0.8,
            sim_duration_ms: 40_000,
            rbs_per_subchannel: 10,
            packet_subchannels: 2,
            noise_figure_db: 9.0,
            channel_model: ChannelModelKind::Fowlerville,
            rng_seed: 1,
            sps_threshold_dbm: -110.0,
            sensing_window_ms: 1000,
            sinr_combining: SinrCombining::Min,
            warmup_ms: 5_000,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let total = self.bandwidth_mhz.total_rbs();
        if self.rbs_per_subchannel == 0 || self.rbs_per_subchannel > total {
            return Err(Error::config(alloc::format!(
                "rbs_per_subchannel must be in [1, {total}], got {}",
                self.rbs_per_subchannel
            )));
        }
        let n = total / self.rbs_per_subchannel;
        if self.packet_subchannels == 0 || self.packet_subchannels > n {
            return Err(Error::config(alloc::format!(
                "packet_subchannels must be in [1, {n}], got {}",
                self.packet_subchannels
            )));
        }
        if self.tx_rate_hz == 0 || 1000 % self.tx_rate_hz != 0 {
            return Err(Error::config("tx_rate_hz must divide 1000"));
        }
        if self.rri_ms != 1000 / self.tx_rate_hz {
            return Err(Error::config(alloc::format!(
                "rri_ms ({}) must equal 1000 / tx_rate_hz ({})",
                self.rri_ms,
                1000 / self.tx_rate_hz
            )));
        }
        if self.slrrc_min > self.slrrc_max {
            return Err(Error::config("slrrc_min exceeds slrrc_max"));
        }
        if !(0.0..=1.0).contains(&self.p_resel) {
            return Err(Error::config("p_resel must be within [0, 1]"));
        }
        if self.sensing_window_ms < self.rri_ms {
            return Err(Error::config("sensing window shorter than one RRI"));
        }
        if !self.tx_power_dbm.is_finite()
            || !self.noise_figure_db.is_finite()
            || !self.sps_threshold_dbm.is_finite()
        {
            return Err(Error::config("non-finite power parameter"));
        }
        Ok(())
    }

    /// Selection window length; the packet latency budget equals one RRI.
    pub fn latency_ms(&self) -> u32 {
        self.rri_ms
    }
}
