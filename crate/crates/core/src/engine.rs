//! The discrete-event core.
//!
//! Every vehicle generates one BSM per RRI, starting at a random phase.
//! BSMs sit in a priority queue ordered by `(gen_time, tx_id)`. Popping a
//! BSM first commits every subframe strictly before its generation time
//! (so the scheduler sees a complete sensing window), then dispatches on
//! the vehicle's reselection counter:
//!
//! * `-1`: first transmission, run SB-SPS and draw a counter;
//! * `0`: keep the reservation with probability `p_resel`, otherwise run
//!   SB-SPS again; either way draw a fresh counter;
//! * `> 0`: transmit one RRI after the previous transmission.
//!
//! The counter drops by one per transmission. Committing a subframe runs
//! the batch receiver at every vehicle: the HV produces full reception
//! outcomes and metrics, RVs only feed their sensing windows.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelModelConfig};
use crate::error::{Error, Result};
use crate::grid::Csr;
use crate::metrics::{MetricsCollector, MetricsReport, DEFAULT_PER_BIN_M};
use crate::mobility::{MobilitySnapshot, TrackSet};
use crate::params::SimParams;
use crate::phy::{self, BlerTable, LinkQuality, PhyContext, Reception, ReceptionOutcome, RxSignal, Transmission};
use crate::rng::{self, Stream, VehicleRng};
use crate::sbsps::{self, CandidateSet, Reselection, SensingWindow, SpsState};

/// A generated safety message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsmEvent {
    pub gen_time_ms: u64,
    pub tx_id: u32,
    pub seq: u32,
    pub snapshot: MobilitySnapshot,
}

impl BsmEvent {
    fn key(&self) -> (u64, u32) {
        (self.gen_time_ms, self.tx_id)
    }
}

impl Eq for BsmEvent {}

impl PartialOrd for BsmEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BsmEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Min-queue of BSMs keyed by `(gen_time_ms, tx_id)`.
#[derive(Debug, Clone, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<BsmEvent>>,
}

impl EventQueue {
    pub fn push(&mut self, ev: BsmEvent) {
        self.heap.push(Reverse(ev));
    }

    pub fn pop(&mut self) -> Option<BsmEvent> {
        self.heap.pop().map(|r| r.0)
    }

    pub fn peek(&self) -> Option<&BsmEvent> {
        self.heap.peek().map(|r| &r.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub params: SimParams,
    pub channel: ChannelModelConfig,
    pub bler: BlerTable,
    pub hv_id: u32,
    pub per_bin_width_m: f64,
}

impl EngineConfig {
    pub fn new(params: SimParams, channel: ChannelModelConfig, bler: BlerTable, hv_id: u32) -> Self {
        EngineConfig {
            params,
            channel,
            bler,
            hv_id,
            per_bin_width_m: DEFAULT_PER_BIN_M,
        }
    }
}

/// A packet as it reached the HV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvReception {
    pub outcome: ReceptionOutcome,
    pub distance_m: f64,
    pub gen_time_ms: u64,
    pub seq: u32,
    /// Transmitter state at generation time.
    pub snapshot: MobilitySnapshot,
}

/// Which dispatch branch served a BSM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DispatchPath {
    FirstTx,
    Keep,
    Reselect,
    Periodic,
}

/// Hooks into a running engine. All methods default to no-ops.
///
/// HV receptions and committed subframes are reported on the measurement
/// clock and only after warm-up. Dispatch and selection hooks fire for
/// every event and carry engine-clock times, which run `warmup_ms` ahead
/// of the measurement clock.
pub trait Observer {
    fn on_hv_reception(&mut self, _r: &HvReception) {}
    /// Called after every measured subframe that carried at least one
    /// transmission.
    fn on_subframe_committed(&mut self, _subframe: u64) {}
    fn on_dispatch(&mut self, _ev: &BsmEvent, _path: DispatchPath, _tx: &Transmission, _slrrc_after: i32) {}
    fn on_selection(&mut self, _vehicle_id: u32, _cands: &CandidateSet, _chosen: Csr) {}
    /// Polled once per event; returning true ends the run early with the
    /// metrics gathered so far.
    fn should_stop(&self) -> bool {
        false
    }
}

impl Observer for () {}

struct Vehicle {
    id: u32,
    sps: SpsState,
    sensing: SensingWindow,
    rng: VehicleRng,
    seq: u32,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    idx: usize,
    tx: Transmission,
    snapshot: MobilitySnapshot,
}

pub struct Engine {
    params: SimParams,
    channel: ChannelModelConfig,
    phy: PhyContext,
    tracks: TrackSet,
    hv: usize,
    vehicles: Vec<Vehicle>,
    queue: EventQueue,
    /// Engine-clock time of measurement t = 0.
    origin: u64,
    horizon: u64,
    pending: BTreeMap<u64, Vec<Pending>>,
    metrics: MetricsCollector,
    positions: Vec<(f64, f64)>,
    transmitting: Vec<bool>,
    signals: Vec<RxSignal>,
    quality: Vec<LinkQuality>,
    receptions: Vec<Reception>,
}

impl Engine {
    pub fn new(cfg: EngineConfig, tracks: TrackSet) -> Result<Self> {
        let EngineConfig {
            params,
            channel,
            bler,
            hv_id,
            per_bin_width_m,
        } = cfg;
        params.validate()?;
        channel.validate()?;
        if channel.model != params.channel_model {
            return Err(Error::config("channel config model differs from sim params"));
        }
        if !(per_bin_width_m > 0.0) {
            return Err(Error::config("PER bin width must be positive"));
        }
        let hv = if tracks.is_empty() {
            0
        } else {
            tracks
                .index_of(hv_id)
                .ok_or_else(|| Error::config(alloc::format!("hv_id {hv_id} has no track")))?
        };
        let rri = params.rri_ms as i64;
        for t in &tracks.tracks {
            if let Some((start, end)) = t.extent() {
                if start > 0 || end < params.sim_duration_ms as i64 - rri {
                    return Err(Error::config(alloc::format!(
                        "track of vehicle {} covers [{start}, {end}] ms, run needs [0, {}] ms",
                        t.vehicle_id,
                        params.sim_duration_ms as i64 - rri
                    )));
                }
            }
        }

        let origin = params.warmup_ms;
        let horizon = origin + params.sim_duration_ms;
        let phy = PhyContext::new(&params, bler)?;
        let n = tracks.len();
        let mut phase_rng = rng::stream_rng(params.rng_seed, Stream::Phase);
        let mut queue = EventQueue::default();
        let mut vehicles = Vec::with_capacity(n);
        for t in &tracks.tracks {
            let phase = phase_rng.gen_range(0..params.rri_ms) as u64;
            if phase < horizon {
                queue.push(BsmEvent {
                    gen_time_ms: phase,
                    tx_id: t.vehicle_id,
                    seq: 0,
                    snapshot: t.snapshot_clamped(phase as i64 - origin as i64),
                });
            }
            vehicles.push(Vehicle {
                id: t.vehicle_id,
                sps: SpsState::default(),
                sensing: SensingWindow::new(t.vehicle_id, params.sensing_window_ms),
                rng: rng::vehicle_rng(params.rng_seed, t.vehicle_id),
                seq: 0,
            });
        }

        Ok(Engine {
            metrics: MetricsCollector::new(n as u32, params.sim_duration_ms, per_bin_width_m),
            params,
            channel,
            phy,
            hv,
            vehicles,
            queue,
            origin,
            horizon,
            pending: BTreeMap::new(),
            positions: vec![(0.0, 0.0); n],
            transmitting: vec![false; n],
            signals: Vec::new(),
            quality: Vec::new(),
            receptions: Vec::new(),
            tracks,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn hv_id(&self) -> Option<u32> {
        self.vehicles.get(self.hv).map(|v| v.id)
    }

    /// Runs until the queue drains and every scheduled transmission has
    /// been committed.
    pub fn run<O: Observer + ?Sized>(mut self, obs: &mut O) -> Result<MetricsReport> {
        while let Some(ev) = self.queue.pop() {
            if obs.should_stop() {
                return Ok(self.metrics.finish());
            }
            self.commit_before(ev.gen_time_ms, obs);
            let idx = self
                .tracks
                .index_of(ev.tx_id)
                .ok_or_else(|| Error::invariant("event for unknown vehicle"))?;
            let (path, tx) = self.dispatch(idx, &ev, obs)?;
            obs.on_dispatch(&ev, path, &tx, self.vehicles[idx].sps.slrrc);
            self.pending.entry(tx.csr.subframe).or_default().push(Pending {
                idx,
                tx,
                snapshot: ev.snapshot,
            });

            let next = ev.gen_time_ms + self.params.rri_ms as u64;
            if next < self.horizon {
                let v = &mut self.vehicles[idx];
                v.seq += 1;
                let snapshot = self.tracks.tracks[idx].snapshot_clamped(next as i64 - self.origin as i64);
                self.queue.push(BsmEvent {
                    gen_time_ms: next,
                    tx_id: ev.tx_id,
                    seq: v.seq,
                    snapshot,
                });
            }
        }
        self.commit_before(u64::MAX, obs);
        Ok(self.metrics.finish())
    }

    fn dispatch<O: Observer + ?Sized>(
        &mut self,
        idx: usize,
        ev: &BsmEvent,
        obs: &mut O,
    ) -> Result<(DispatchPath, Transmission)> {
        let params = &self.params;
        let v = &mut self.vehicles[idx];
        let rri = params.rri_ms as u64;
        let (path, csr) = match v.sps.slrrc {
            -1 => {
                let (cands, csr) = sbsps::select_resource(&v.sensing, ev.gen_time_ms, params, &mut v.rng)?;
                obs.on_selection(v.id, &cands, csr);
                v.sps.slrrc = sbsps::draw_slrrc(params, &mut v.rng) as i32;
                (DispatchPath::FirstTx, csr)
            }
            0 => {
                let prev = v
                    .sps
                    .reserved
                    .ok_or_else(|| Error::invariant("counter expired without a reservation"))?;
                let res = match sbsps::on_counter_zero(&v.sps, params.p_resel, &mut v.rng)? {
                    Reselection::KeepCsr => (DispatchPath::Keep, prev.shifted(rri)),
                    Reselection::Reselect => {
                        let (cands, csr) =
                            sbsps::select_resource(&v.sensing, ev.gen_time_ms, params, &mut v.rng)?;
                        obs.on_selection(v.id, &cands, csr);
                        (DispatchPath::Reselect, csr)
                    }
                };
                v.sps.slrrc = sbsps::draw_slrrc(params, &mut v.rng) as i32;
                res
            }
            n if n > 0 => {
                let prev = v
                    .sps
                    .reserved
                    .ok_or_else(|| Error::invariant("periodic transmission without a reservation"))?;
                (DispatchPath::Periodic, prev.shifted(rri))
            }
            n => return Err(Error::invariant(alloc::format!("slrrc {n}"))),
        };
        if csr.subframe <= ev.gen_time_ms || csr.subframe > ev.gen_time_ms + params.latency_ms() as u64 {
            return Err(Error::invariant(alloc::format!(
                "vehicle {} scheduled at {} for a packet generated at {}",
                v.id,
                csr.subframe,
                ev.gen_time_ms
            )));
        }
        v.sps.reserved = Some(csr);
        v.sps.slrrc -= 1;
        Ok((
            path,
            Transmission {
                tx_id: v.id,
                csr,
                gen_time_ms: ev.gen_time_ms,
                seq: ev.seq,
            },
        ))
    }

    fn commit_before<O: Observer + ?Sized>(&mut self, t: u64, obs: &mut O) {
        while let Some(entry) = self.pending.first_entry() {
            if *entry.key() >= t {
                break;
            }
            let (sf, txs) = entry.remove_entry();
            self.commit_subframe(sf, &txs, obs);
            if sf >= self.origin {
                obs.on_subframe_committed(sf - self.origin);
            }
        }
    }

    fn commit_subframe<O: Observer + ?Sized>(&mut self, sf: u64, txs: &[Pending], obs: &mut O) {
        let origin = self.origin;
        let t_ms = sf as i64 - origin as i64;
        for (i, track) in self.tracks.tracks.iter().enumerate() {
            let s = track.snapshot_clamped(t_ms);
            self.positions[i] = (s.x_m, s.y_m);
        }
        for p in txs {
            self.transmitting[p.idx] = true;
            self.vehicles[p.idx].sensing.record_own_tx(sf);
        }
        self.metrics
            .count_transmissions(txs.iter().filter(|p| p.tx.gen_time_ms >= origin).count() as u64);

        let seed = self.params.rng_seed;
        let tx_power = self.params.tx_power_dbm;
        let min_d = self.channel.min_distance_m;
        for r in 0..self.vehicles.len() {
            let is_hv = r == self.hv;
            if self.transmitting[r] && !is_hv {
                continue;
            }
            let rx_id = self.vehicles[r].id;
            let (rx, ry) = self.positions[r];
            self.signals.clear();
            for p in txs.iter().filter(|p| p.idx != r) {
                let (tx, ty) = self.positions[p.idx];
                let d = libm::hypot(tx - rx, ty - ry).max(min_d);
                let pl = channel::path_loss_clamped(&self.channel, d);
                let shadow = channel::shadowing_sample(&self.channel, seed, p.tx.tx_id, rx_id, sf);
                self.signals.push(RxSignal::new(p.tx.tx_id, p.tx.csr, tx_power - pl + shadow));
            }
            if self.signals.is_empty() {
                continue;
            }
            phy::receive_subframe(
                &self.phy,
                rx_id,
                sf,
                self.transmitting[r],
                &self.signals,
                &mut self.quality,
                &mut self.receptions,
            );
            let sensing = &mut self.vehicles[r].sensing;
            for e in phy::sensing_feed(&self.receptions, sf) {
                sensing.record_sensed(e);
            }
            if is_hv {
                let others = txs.iter().filter(|p| p.idx != r);
                for (rec, p) in self.receptions.iter().zip(others) {
                    if p.tx.gen_time_ms < origin {
                        continue;
                    }
                    let (tx, ty) = self.positions[p.idx];
                    let distance_m = libm::hypot(tx - rx, ty - ry);
                    let gen_time_ms = p.tx.gen_time_ms - origin;
                    let hv_rec = HvReception {
                        outcome: rec.outcome(rx_id, sf - origin),
                        distance_m,
                        gen_time_ms,
                        seq: p.tx.seq,
                        snapshot: p.snapshot,
                    };
                    self.metrics.record(&hv_rec.outcome, distance_m, gen_time_ms);
                    obs.on_hv_reception(&hv_rec);
                }
            }
        }
        for p in txs {
            self.transmitting[p.idx] = false;
        }
    }
}
