//! Large-scale propagation: two path loss models, i.i.d. log-normal
//! shadowing and the thermal noise floor.
//!
//! Fowlerville is the dual-slope log-distance freeway model fitted to the
//! Fowlerville (Michigan) DSRC measurement campaign. WINNER+ B1 is the
//! urban micro-cell model, here with both ends at vehicle antenna height.
//! No fast fading is applied: the BLER curves absorb short-term effects.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ChannelModelKind, SimParams};
use crate::rng::{self, Stream};
use crate::units::{RB_HZ, THERMAL_NOISE_DBM_HZ};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Dual-slope log-distance model:
/// `PL(d) = pl0 + 10 n1 log10(d / d0)` up to the breakpoint and
/// `n2` beyond it, continuous at the breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FowlervilleParams {
    pub pl0_db: f64,
    pub d0_m: f64,
    pub exponent_near: f64,
    pub exponent_far: f64,
    pub breakpoint_m: f64,
}

impl Default for FowlervilleParams {
    fn default() -> Self {
        FowlervilleParams {
            // free-space loss at 1 m, 5.9 GHz
            pl0_db: 47.86,
            d0_m: 1.0,
            exponent_near: 1.66,
            exponent_far: 2.88,
            breakpoint_m: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakpointMode {
    /// Beyond `d'_BP` use the height-dependent 40 dB/decade far formula.
    #[default]
    Standard,
    /// Beyond `d'_BP` add 40 dB/decade to the LOS loss at the breakpoint.
    Continuous,
    /// LOS formula at every distance.
    None,
}

/// `PL = a log10(d) + b + c log10(fc / 5)` below the breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WinnerB1Params {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub tx_height_m: f64,
    pub rx_height_m: f64,
    pub breakpoint: BreakpointMode,
    /// Overrides the `4 h'tx h'rx fc / c` breakpoint when set.
    pub breakpoint_m: Option<f64>,
}

impl Default for WinnerB1Params {
    fn default() -> Self {
        WinnerB1Params {
            a: 22.7,
            b: 41.0,
            c: 20.0,
            tx_height_m: 1.5,
            rx_height_m: 1.5,
            breakpoint: BreakpointMode::Standard,
            breakpoint_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModelConfig {
    pub model: ChannelModelKind,
    pub carrier_ghz: f64,
    pub shadowing_sigma_db: f64,
    /// Distances below this are clamped up to it.
    pub min_distance_m: f64,
    pub fowlerville: FowlervilleParams,
    pub winner: WinnerB1Params,
}

impl Default for ChannelModelConfig {
    fn default() -> Self {
        ChannelModelConfig::for_model(ChannelModelKind::Fowlerville)
    }
}

impl ChannelModelConfig {
    pub fn for_model(model: ChannelModelKind) -> Self {
        ChannelModelConfig {
            model,
            carrier_ghz: 5.9,
            shadowing_sigma_db: default_sigma_db(model),
            min_distance_m: 1.0,
            fowlerville: FowlervilleParams::default(),
            winner: WinnerB1Params::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.fowlerville;
        if !(self.carrier_ghz > 0.0) {
            return Err(Error::config("carrier_ghz must be positive"));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::config("shadowing_sigma_db must be >= 0"));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(Error::config("min_distance_m must be positive"));
        }
        if !(f.exponent_near > 0.0 && f.exponent_far > 0.0) {
            return Err(Error::config("path loss exponents must be positive"));
        }
        if !(f.breakpoint_m > 0.0 && f.d0_m > 0.0) {
            return Err(Error::config("fowlerville distances must be positive"));
        }
        let w = &self.winner;
        if !(w.a > 0.0) {
            return Err(Error::config("winner slope must be positive"));
        }
        if w.breakpoint != BreakpointMode::None {
            if let Some(bp) = w.breakpoint_m {
                if !(bp > 0.0) {
                    return Err(Error::config("winner breakpoint must be positive"));
                }
            } else if !(w.tx_height_m > 1.0 && w.rx_height_m > 1.0) {
                return Err(Error::config(
                    "winner antenna heights must exceed 1 m (effective height h - 1)",
                ));
            }
        }
        Ok(())
    }

    /// Breakpoint distance of the WINNER+ B1 model, if one applies.
    pub fn winner_breakpoint_m(&self) -> Option<f64> {
        let w = &self.winner;
        match w.breakpoint {
            BreakpointMode::None => None,
            _ => Some(w.breakpoint_m.unwrap_or_else(|| {
                4.0 * (w.tx_height_m - 1.0) * (w.rx_height_m - 1.0) * self.carrier_ghz * 1e9
                    / SPEED_OF_LIGHT
            })),
        }
    }

    fn winner_los(&self, d: f64) -> f64 {
        let w = &self.winner;
        w.a * libm::log10(d) + w.b + w.c * libm::log10(self.carrier_ghz / 5.0)
    }

    fn winner_far(&self, d: f64) -> f64 {
        let w = &self.winner;
        40.0 * libm::log10(d) + 9.45
            - 17.3 * libm::log10(w.tx_height_m - 1.0)
            - 17.3 * libm::log10(w.rx_height_m - 1.0)
            + 2.7 * libm::log10(self.carrier_ghz / 5.0)
    }

    fn fowlerville(&self, d: f64) -> f64 {
        let f = &self.fowlerville;
        let d = d.max(f.d0_m);
        if d <= f.breakpoint_m {
            f.pl0_db + 10.0 * f.exponent_near * libm::log10(d / f.d0_m)
        } else {
            let bp = f.breakpoint_m.max(f.d0_m);
            f.pl0_db
                + 10.0 * f.exponent_near * libm::log10(bp / f.d0_m)
                + 10.0 * f.exponent_far * libm::log10(d / bp)
        }
    }
}

pub fn default_sigma_db(model: ChannelModelKind) -> f64 {
    match model {
        ChannelModelKind::Fowlerville => 5.6,
        ChannelModelKind::WinnerB1 => 3.0,
    }
}

/// Path loss in dB; non-decreasing in distance for both models.
pub fn path_loss_db(cfg: &ChannelModelConfig, distance_m: f64) -> Result<f64> {
    if !(distance_m >= 0.0) {
        return Err(Error::Domain(distance_m));
    }
    let d = distance_m.max(cfg.min_distance_m);
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(distance_m));
    }
    Ok(path_loss_clamped(cfg, d))
}

/// Hot-path variant: `d` must already be finite and clamped.
#[inline]
pub(crate) fn path_loss_clamped(cfg: &ChannelModelConfig, d: f64) -> f64 {
    match cfg.model {
        ChannelModelKind::Fowlerville => cfg.fowlerville(d),
        ChannelModelKind::WinnerB1 => match cfg.winner_breakpoint_m() {
            Some(bp) if d > bp => match cfg.winner.breakpoint {
                BreakpointMode::Continuous => {
                    cfg.winner_los(bp) + 40.0 * libm::log10(d / bp)
                }
                _ => cfg.winner_far(d).max(cfg.winner_los(bp)),
            },
            _ => cfg.winner_los(d),
        },
    }
}

/// Zero-mean Gaussian shadowing deviate in dB for one link in one subframe.
#[inline]
pub fn shadowing_sample(cfg: &ChannelModelConfig, seed: u64, tx_id: u32, rx_id: u32, subframe: u64) -> f64 {
    if cfg.shadowing_sigma_db == 0.0 {
        return 0.0;
    }
    cfg.shadowing_sigma_db
        * rng::keyed_normal(seed, Stream::Shadowing, tx_id as u64, rx_id as u64, subframe)
}

/// Thermal noise power in dBm over `bandwidth_hz`.
pub fn thermal_noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_HZ + 10.0 * libm::log10(bandwidth_hz) + noise_figure_db
}

/// Noise over the packet's occupied bandwidth.
pub fn noise_power_dbm(params: &SimParams) -> f64 {
    let hz = params.packet_subchannels as f64 * params.rbs_per_subchannel as f64 * RB_HZ;
    thermal_noise_dbm(hz, params.noise_figure_db)
}

/// Noise over one subchannel.
pub fn subchannel_noise_dbm(params: &SimParams) -> f64 {
    thermal_noise_dbm(params.rbs_per_subchannel as f64 * RB_HZ, params.noise_figure_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub distance_m: f64,
    pub rx_power_dbm: f64,
    pub shadow_db: f64,
}

pub fn received_power_dbm(
    cfg: &ChannelModelConfig,
    tx_power_dbm: f64,
    distance_m: f64,
    shadow_db: f64,
) -> Result<f64> {
    Ok(tx_power_dbm - path_loss_db(cfg, distance_m)? + shadow_db)
}

pub fn sample_link(
    cfg: &ChannelModelConfig,
    tx_power_dbm: f64,
    distance_m: f64,
    seed: u64,
    tx_id: u32,
    rx_id: u32,
    subframe: u64,
) -> Result<LinkSample> {
    let shadow_db = shadowing_sample(cfg, seed, tx_id, rx_id, subframe);
    Ok(LinkSample {
        distance_m,
        rx_power_dbm: received_power_dbm(cfg, tx_power_dbm, distance_m, shadow_db)?,
        shadow_db,
    })
}
