//! Vehicle position streams: sampled traces and the built-in linear road
//! scenario (uniform random placement, constant speed, wrap-around at the
//! road ends).

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::VehicleRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_ms: i64,
    pub vehicle_id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub speed_mps: f64,
    pub heading_deg: f64,
    pub accel_mps2: Option<f64>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

/// Kinematic state carried in a BSM.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MobilitySnapshot {
    pub x_m: f64,
    pub y_m: f64,
    pub speed_mps: f64,
    pub heading_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub road_length_m: f64,
    pub lanes: u32,
    pub lane_width_m: f64,
    pub n_vehicles: u32,
    pub speed_mps: f64,
    pub hv_id: u32,
    pub placement_seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            road_length_m: 1200.0,
            lanes: 6,
            lane_width_m: 3.5,
            n_vehicles: 100,
            speed_mps: 30.0,
            hv_id: 0,
            placement_seed: 1,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_vehicles == 0 {
            return Err(Error::config("scenario needs at least one vehicle"));
        }
        if self.hv_id >= self.n_vehicles {
            return Err(Error::config(alloc::format!(
                "hv_id {} not below n_vehicles {}",
                self.hv_id,
                self.n_vehicles
            )));
        }
        if !(self.road_length_m > 0.0) || self.lanes == 0 || !(self.lane_width_m > 0.0) {
            return Err(Error::config("road geometry must be positive"));
        }
        if !self.speed_mps.is_finite() || self.speed_mps < 0.0 {
            return Err(Error::config("speed must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Constant-velocity motion along the x axis of a ring road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearTrack {
    pub x0_m: f64,
    pub lane: u32,
    pub y_m: f64,
    /// Signed velocity along x.
    pub velocity_mps: f64,
    pub road_length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrackKind {
    Linear(LinearTrack),
    /// Records sorted by time, at least one.
    Sampled(Vec<TraceRecord>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub vehicle_id: u32,
    pub kind: TrackKind,
}

fn wrap(x: f64, len: f64) -> f64 {
    let r = libm::fmod(x, len);
    if r < 0.0 {
        r + len
    } else {
        r
    }
}

impl Track {
    /// Time extent in ms; `None` for generator tracks, defined everywhere.
    pub fn extent(&self) -> Option<(i64, i64)> {
        match &self.kind {
            TrackKind::Linear(_) => None,
            TrackKind::Sampled(r) => Some((r[0].time_ms, r[r.len() - 1].time_ms)),
        }
    }

    pub fn position_at(&self, t_ms: i64) -> Result<(f64, f64)> {
        self.snapshot_at(t_ms).map(|s| (s.x_m, s.y_m))
    }

    pub fn snapshot_at(&self, t_ms: i64) -> Result<MobilitySnapshot> {
        match &self.kind {
            TrackKind::Linear(l) => Ok(linear_snapshot(l, t_ms)),
            TrackKind::Sampled(records) => {
                let (start, end) = (records[0].time_ms, records[records.len() - 1].time_ms);
                if t_ms < start || t_ms > end {
                    return Err(Error::Extrapolation {
                        vehicle_id: self.vehicle_id,
                        t_ms,
                        start_ms: start,
                        end_ms: end,
                    });
                }
                Ok(sampled_snapshot(records, t_ms))
            }
        }
    }

    /// Like [`Track::snapshot_at`] but holds the first/last record outside
    /// the extent of a sampled track.
    pub fn snapshot_clamped(&self, t_ms: i64) -> MobilitySnapshot {
        match &self.kind {
            TrackKind::Linear(l) => linear_snapshot(l, t_ms),
            TrackKind::Sampled(records) => {
                let t = t_ms.clamp(records[0].time_ms, records[records.len() - 1].time_ms);
                sampled_snapshot(records, t)
            }
        }
    }
}

fn linear_snapshot(l: &LinearTrack, t_ms: i64) -> MobilitySnapshot {
    let x = wrap(l.x0_m + l.velocity_mps * t_ms as f64 / 1000.0, l.road_length_m);
    MobilitySnapshot {
        x_m: x,
        y_m: l.y_m,
        speed_mps: l.velocity_mps.abs(),
        heading_deg: if l.velocity_mps < 0.0 { 270.0 } else { 90.0 },
    }
}

fn sampled_snapshot(records: &[TraceRecord], t_ms: i64) -> MobilitySnapshot {
    // last record at or before t
    let i = records.partition_point(|r| r.time_ms <= t_ms) - 1;
    let a = &records[i];
    let (x, y) = if a.time_ms == t_ms || i + 1 == records.len() {
        (a.x_m, a.y_m)
    } else {
        let b = &records[i + 1];
        let f = (t_ms - a.time_ms) as f64 / (b.time_ms - a.time_ms) as f64;
        (a.x_m + f * (b.x_m - a.x_m), a.y_m + f * (b.y_m - a.y_m))
    };
    MobilitySnapshot {
        x_m: x,
        y_m: y,
        speed_mps: a.speed_mps,
        heading_deg: a.heading_deg,
    }
}

/// Free-function form of [`Track::position_at`].
pub fn position_at(track: &Track, t_ms: i64) -> Result<(f64, f64)> {
    track.position_at(t_ms)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackSet {
    /// Sorted by vehicle id, ids unique.
    pub tracks: Vec<Track>,
}

impl TrackSet {
    pub fn new(mut tracks: Vec<Track>) -> Result<Self> {
        tracks.sort_by_key(|t| t.vehicle_id);
        if let Some(w) = tracks.windows(2).find(|w| w[0].vehicle_id == w[1].vehicle_id) {
            return Err(Error::config(alloc::format!(
                "duplicate track for vehicle {}",
                w[0].vehicle_id
            )));
        }
        for t in &tracks {
            if let TrackKind::Sampled(r) = &t.kind {
                if r.is_empty() {
                    return Err(Error::config(alloc::format!(
                        "vehicle {} has an empty track",
                        t.vehicle_id
                    )));
                }
            }
        }
        Ok(TrackSet { tracks })
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn index_of(&self, vehicle_id: u32) -> Option<usize> {
        self.tracks.binary_search_by_key(&vehicle_id, |t| t.vehicle_id).ok()
    }

    pub fn get(&self, vehicle_id: u32) -> Option<&Track> {
        self.index_of(vehicle_id).map(|i| &self.tracks[i])
    }

    /// Groups time-sorted records into per-vehicle tracks.
    pub fn from_records(records: Vec<TraceRecord>) -> Result<Self> {
        let mut by_id: alloc::collections::BTreeMap<u32, Vec<TraceRecord>> = Default::default();
        for r in records {
            let v = by_id.entry(r.vehicle_id).or_default();
            if let Some(prev) = v.last() {
                if r.time_ms <= prev.time_ms {
                    return Err(Error::config(alloc::format!(
                        "vehicle {}: time {} ms does not advance past {} ms",
                        r.vehicle_id,
                        r.time_ms,
                        prev.time_ms
                    )));
                }
            }
            v.push(r);
        }
        TrackSet::new(
            by_id
                .into_iter()
                .map(|(vehicle_id, r)| Track {
                    vehicle_id,
                    kind: TrackKind::Sampled(r),
                })
                .collect(),
        )
    }
}

/// Places `n_vehicles` uniformly on the road (x and lane) and moves them at
/// constant speed. Lower half of the lanes drive towards +x, the upper half
/// towards -x. Deterministic in `placement_seed`.
pub fn generate_linear_scenario(spec: &ScenarioSpec) -> Result<TrackSet> {
    spec.validate()?;
    let mut rng = VehicleRng::seed_from_u64(spec.placement_seed);
    let tracks = (0..spec.n_vehicles)
        .map(|id| {
            let x0 = rng.gen::<f64>() * spec.road_length_m;
            let lane = rng.gen_range(0..spec.lanes);
            let forward = lane < spec.lanes.div_ceil(2);
            Track {
                vehicle_id: id,
                kind: TrackKind::Linear(LinearTrack {
                    x0_m: x0,
                    lane,
                    y_m: (lane as f64 + 0.5) * spec.lane_width_m,
                    velocity_mps: if forward { spec.speed_mps } else { -spec.speed_mps },
                    road_length_m: spec.road_length_m,
                }),
            }
        })
        .collect();
    TrackSet::new(tracks)
}
