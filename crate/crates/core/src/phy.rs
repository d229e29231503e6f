//! Abstracted receiver: SINR at subchannel granularity with one PSD value
//! per (transmission, subchannel), BLER lookup and a Bernoulli decode.
//!
//! Every receiver uses the same machinery. The engine keeps the full
//! [`ReceptionOutcome`] only for the host vehicle; remote vehicles turn
//! their receptions into MAC-level [`SensedEntry`] values.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::channel;
use crate::error::{Error, Result};
use crate::grid::{self, Csr};
use crate::params::{SimParams, SinrCombining};
use crate::rng::{self, Stream};
use crate::sbsps::SensedEntry;
use crate::units::{db_to_lin, lin_to_db};

/// A scheduled sidelink transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub tx_id: u32,
    pub csr: Csr,
    pub gen_time_ms: u64,
    pub seq: u32,
}

/// A transmission as it arrives at one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxSignal {
    pub tx_id: u32,
    pub csr: Csr,
    pub rx_power_dbm: f64,
    /// Same power in mW per occupied subchannel.
    psd_mw: f64,
}

impl RxSignal {
    pub fn new(tx_id: u32, csr: Csr, rx_power_dbm: f64) -> Self {
        RxSignal {
            tx_id,
            csr,
            rx_power_dbm,
            psd_mw: db_to_lin(rx_power_dbm) / csr.subchannel_len as f64,
        }
    }
}

/// Link quality of one signal in a subframe batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQuality {
    pub sinr_db: f64,
    /// Interference-free SNR over the packet bandwidth.
    pub snr_db: f64,
    /// Received power per subchannel.
    pub rsrp_dbm: f64,
    /// Total power (all signals plus noise) on the packet's subchannels.
    pub rssi_dbm: f64,
    pub interfered: bool,
}

/// SINR-to-BLER curve for one MCS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlerTable {
    pub mcs: u32,
    /// `(sinr_db, bler)`, strictly increasing SINR, non-increasing BLER.
    pub points: Vec<(f64, f64)>,
}

impl BlerTable {
    pub fn new(mcs: u32, points: Vec<(f64, f64)>) -> Result<Self> {
        let t = BlerTable { mcs, points };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::config("BLER table is empty"));
        }
        for (s, b) in &self.points {
            if !s.is_finite() || !(0.0..=1.0).contains(b) {
                return Err(Error::config(alloc::format!(
                    "BLER point ({s}, {b}) out of range"
                )));
            }
        }
        for w in self.points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::config("BLER table SINR column must be strictly increasing"));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::config("BLER must be non-increasing in SINR"));
            }
        }
        Ok(())
    }
}

/// Linear interpolation in `(sinr_db, bler)`; 1 below the first point, 0
/// above the last.
pub fn bler(table: &BlerTable, sinr_db: f64) -> f64 {
    let pts = &table.points;
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    if sinr_db.is_nan() || sinr_db < first.0 {
        return 1.0;
    }
    if sinr_db > last.0 {
        return 0.0;
    }
    // first index with sinr >= query
    let i = pts.partition_point(|p| p.0 < sinr_db);
    if pts[i].0 == sinr_db {
        return pts[i].1;
    }
    let (lo, hi) = (pts[i - 1], pts[i]);
    let t = (sinr_db - lo.0) / (hi.0 - lo.0);
    lo.1 + t * (hi.1 - lo.1)
}

/// Decode succeeds iff the uniform draw clears the block error rate.
#[inline]
pub fn decode(bler: f64, uniform: f64) -> bool {
    uniform >= bler
}

#[inline]
pub fn decode_draw(seed: u64, tx_id: u32, rx_id: u32, subframe: u64) -> f64 {
    rng::keyed_unit(seed, Stream::Decode, tx_id as u64, rx_id as u64, subframe)
}

/// True iff the receiver transmitted in `subframe`. `tx_subframes` must be
/// sorted.
pub fn half_duplex_filter(tx_subframes: &[u64], subframe: u64) -> bool {
    tx_subframes.binary_search(&subframe).is_ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossCause {
    None,
    HalfDuplex,
    Propagation,
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceptionOutcome {
    pub tx_id: u32,
    pub rx_id: u32,
    pub subframe: u64,
    pub sinr_db: f64,
    pub rssi_dbm: f64,
    /// Received signal power of the target transmission.
    pub rx_power_dbm: f64,
    pub decoded: bool,
    pub loss_cause: LossCause,
}

/// Precomputed per-run receiver constants.
#[derive(Debug, Clone)]
pub struct PhyContext {
    pub n_subchannels: usize,
    pub packet_subchannels: usize,
    pub noise_subchannel_lin: f64,
    pub noise_packet_dbm: f64,
    pub combining: SinrCombining,
    pub table: BlerTable,
    pub seed: u64,
}

impl PhyContext {
    pub fn new(params: &SimParams, table: BlerTable) -> Result<Self> {
        table.validate()?;
        Ok(PhyContext {
            n_subchannels: grid::num_subchannels(params)? as usize,
            packet_subchannels: params.packet_subchannels as usize,
            noise_subchannel_lin: db_to_lin(channel::subchannel_noise_dbm(params)),
            noise_packet_dbm: channel::noise_power_dbm(params),
            combining: params.sinr_combining,
            table,
            seed: params.rng_seed,
        })
    }
}

/// Batch SINR for every signal of one subframe at one receiver.
///
/// `noise_subchannel_lin` is the noise power per subchannel in mW; zero is
/// allowed.
pub fn batch_sinr(
    signals: &[RxSignal],
    noise_subchannel_lin: f64,
    combining: SinrCombining,
    out: &mut Vec<LinkQuality>,
) {
    out.clear();
    for (i, sig) in signals.iter().enumerate() {
        let l = sig.csr.subchannel_len as f64;
        let psd = sig.psd_mw;
        let mut acc = match combining {
            SinrCombining::LinearMean => 0.0,
            SinrCombining::Min => f64::INFINITY,
        };
        let mut rssi = 0.0;
        let mut interfered = false;
        for c in sig.csr.subchannels() {
            let mut interference = 0.0;
            for (j, other) in signals.iter().enumerate() {
                if j != i && other.csr.subchannels().contains(&c) {
                    interference += other.psd_mw;
                    interfered = true;
                }
            }
            let sinr_c = psd / (interference + noise_subchannel_lin);
            match combining {
                SinrCombining::LinearMean => acc += sinr_c,
                SinrCombining::Min => acc = acc.min(sinr_c),
            }
            rssi += psd + interference + noise_subchannel_lin;
        }
        let sinr = match combining {
            SinrCombining::LinearMean => acc / l,
            SinrCombining::Min => acc,
        };
        out.push(LinkQuality {
            sinr_db: lin_to_db(sinr),
            snr_db: lin_to_db(psd / noise_subchannel_lin),
            rsrp_dbm: lin_to_db(psd),
            rssi_dbm: lin_to_db(rssi),
            interfered,
        });
    }
}

/// One signal after the decode decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reception {
    pub signal: RxSignal,
    pub quality: LinkQuality,
    pub decoded: bool,
    pub loss_cause: LossCause,
}

/// Runs the receiver for one subframe.
///
/// A transmitting receiver hears nothing: every signal is lost with cause
/// `HalfDuplex`. Otherwise each signal is decoded with probability
/// `1 - BLER(SINR)`; a failure that the interference-free SNR would have
/// survived with the same draw is attributed to collision.
pub fn receive_subframe(
    ctx: &PhyContext,
    rx_id: u32,
    subframe: u64,
    rx_transmitting: bool,
    signals: &[RxSignal],
    scratch: &mut Vec<LinkQuality>,
    out: &mut Vec<Reception>,
) {
    out.clear();
    batch_sinr(signals, ctx.noise_subchannel_lin, ctx.combining, scratch);
    for (sig, q) in signals.iter().zip(scratch.iter()) {
        if rx_transmitting {
            out.push(Reception {
                signal: *sig,
                quality: *q,
                decoded: false,
                loss_cause: LossCause::HalfDuplex,
            });
            continue;
        }
        let u = decode_draw(ctx.seed, sig.tx_id, rx_id, subframe);
        let ok = decode(bler(&ctx.table, q.sinr_db), u);
        let cause = if ok {
            LossCause::None
        } else if q.interfered && decode(bler(&ctx.table, q.snr_db), u) {
            LossCause::Collision
        } else {
            LossCause::Propagation
        };
        out.push(Reception {
            signal: *sig,
            quality: *q,
            decoded: ok,
            loss_cause: cause,
        });
    }
}

impl Reception {
    pub fn outcome(&self, rx_id: u32, subframe: u64) -> ReceptionOutcome {
        ReceptionOutcome {
            tx_id: self.signal.tx_id,
            rx_id,
            subframe,
            sinr_db: self.quality.sinr_db,
            rssi_dbm: self.quality.rssi_dbm,
            rx_power_dbm: self.signal.rx_power_dbm,
            decoded: self.decoded,
            loss_cause: self.loss_cause,
        }
    }

    pub fn sensed(&self, subframe: u64) -> SensedEntry {
        SensedEntry {
            subframe,
            csr: self.signal.csr,
            rsrp_dbm: self.quality.rsrp_dbm,
            rssi_dbm: self.quality.rssi_dbm,
            decoded: self.decoded,
            source_id: self.signal.tx_id,
        }
    }
}

/// MAC-level view of a subframe at a remote vehicle. A deaf (transmitting)
/// receiver yields nothing.
pub fn sensing_feed(receptions: &[Reception], subframe: u64) -> impl Iterator<Item = SensedEntry> + '_ {
    receptions
        .iter()
        .filter(|r| r.loss_cause != LossCause::HalfDuplex)
        .map(move |r| r.sensed(subframe))
}
