#![allow(dead_code)]

use cv2x_core::channel::ChannelModelConfig;
use cv2x_core::engine::{BsmEvent, DispatchPath, EngineConfig, HvReception, Observer};
use cv2x_core::grid::Csr;
use cv2x_core::mobility::{generate_linear_scenario, ScenarioSpec, TraceRecord, TrackSet};
use cv2x_core::params::{Bandwidth, ChannelModelKind, SimParams};
use cv2x_core::phy::{BlerTable, Transmission};
use cv2x_core::sbsps::CandidateSet;
use cv2x_core::{Engine, MetricsReport};

pub fn bler_table() -> BlerTable {
    BlerTable::new(
        5,
        vec![
            (-4.0, 1.0),
            (-2.0, 0.995),
            (0.0, 0.9),
            (2.0, 0.52),
            (4.0, 0.15),
            (6.0, 0.025),
            (8.0, 0.003),
            (10.0, 0.0),
        ],
    )
    .unwrap()
}

pub fn params(bw: Bandwidth, model: ChannelModelKind, duration_ms: u64, seed: u64) -> SimParams {
    SimParams {
        bandwidth_mhz: bw,
        channel_model: model,
        sim_duration_ms: duration_ms,
        rng_seed: seed,
        ..SimParams::default()
    }
}

pub fn scenario_engine(n: u32, params: SimParams) -> Engine {
    let tracks = generate_linear_scenario(&ScenarioSpec {
        n_vehicles: n,
        placement_seed: params.rng_seed,
        ..ScenarioSpec::default()
    })
    .unwrap();
    engine_with(params, tracks, 0)
}

pub fn engine_with(params: SimParams, tracks: TrackSet, hv_id: u32) -> Engine {
    let channel = ChannelModelConfig::for_model(params.channel_model);
    Engine::new(EngineConfig::new(params, channel, bler_table(), hv_id), tracks).unwrap()
}

/// Parked vehicles at the given x positions, ids from 0.
pub fn parked(xs: &[f64], duration_ms: u64) -> TrackSet {
    let mut records = Vec::new();
    for (id, &x) in xs.iter().enumerate() {
        for t in [0, duration_ms as i64] {
            records.push(TraceRecord {
                time_ms: t,
                vehicle_id: id as u32,
                x_m: x,
                y_m: 0.0,
                speed_mps: 0.0,
                heading_deg: 90.0,
                accel_mps2: None,
                lat: None,
                lon: None,
            });
        }
    }
    records.sort_by_key(|r| r.time_ms);
    TrackSet::from_records(records).unwrap()
}

#[derive(Debug, Clone)]
pub struct Dispatch {
    pub ev: BsmEvent,
    pub path: DispatchPath,
    pub tx: Transmission,
    pub slrrc_after: i32,
}

#[derive(Default)]
pub struct Recorder {
    pub dispatches: Vec<Dispatch>,
    pub receptions: Vec<HvReception>,
    pub selections: Vec<(u32, usize, usize, Csr)>,
    pub committed: Vec<u64>,
}

impl Observer for Recorder {
    fn on_hv_reception(&mut self, r: &HvReception) {
        self.receptions.push(*r);
    }

    fn on_subframe_committed(&mut self, subframe: u64) {
        self.committed.push(subframe);
    }

    fn on_dispatch(&mut self, ev: &BsmEvent, path: DispatchPath, tx: &Transmission, slrrc_after: i32) {
        self.dispatches.push(Dispatch {
            ev: *ev,
            path,
            tx: *tx,
            slrrc_after,
        });
    }

    fn on_selection(&mut self, vehicle_id: u32, cands: &CandidateSet, chosen: Csr) {
        self.selections
            .push((vehicle_id, cands.set_a.len(), cands.set_b.len(), chosen));
    }
}

pub fn run_recorded(engine: Engine) -> (MetricsReport, Recorder) {
    let mut rec = Recorder::default();
    let report = engine.run(&mut rec).unwrap();
    (report, rec)
}
