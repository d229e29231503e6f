//! Runtime matrix: every (channel model, vehicle count, bandwidth) cell is
//! run as fast as possible `repetitions` times.

use std::fmt::Write as _;
use std::path::Path;

use cv2x_core::{Bandwidth, ChannelModelKind};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::{mem, run};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchMatrix {
    pub vehicles: Vec<u32>,
    pub bandwidths_mhz: Vec<Bandwidth>,
    pub channel_models: Vec<ChannelModelKind>,
    pub repetitions: u32,
    /// Applied to every cell; its scenario size, bandwidth and model are
    /// replaced per cell.
    pub base: RunConfig,
}

impl Default for BenchMatrix {
    fn default() -> Self {
        BenchMatrix {
            vehicles: vec![100, 200, 500],
            bandwidths_mhz: vec![Bandwidth::Mhz10, Bandwidth::Mhz20],
            channel_models: vec![ChannelModelKind::Fowlerville, ChannelModelKind::WinnerB1],
            repetitions: 1,
            base: RunConfig::default(),
        }
    }
}

impl BenchMatrix {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: BenchMatrix = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            msg: e.to_string(),
        })?;
        if m.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        Ok(m)
    }

    pub fn cells(&self) -> Vec<(ChannelModelKind, u32, Bandwidth)> {
        let mut out = Vec::new();
        for &m in &self.channel_models {
            for &n in &self.vehicles {
                for &b in &self.bandwidths_mhz {
                    out.push((m, n, b));
                }
            }
        }
        out
    }

    fn cell_config(&self, model: ChannelModelKind, n: u32, bw: Bandwidth) -> RunConfig {
        let mut c = self.base.clone();
        c.sim.channel_model = model;
        c.sim.bandwidth_mhz = bw;
        c.channel = Default::default();
        c.trace = None;
        let mut s = c.scenario.take().unwrap_or_default();
        s.n_vehicles = n;
        c.scenario = Some(s);
        c.pacing = None;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub channel_model: ChannelModelKind,
    pub n_vehicles: u32,
    pub bandwidth_mhz: Bandwidth,
    pub repetitions: u32,
    pub sim_duration_ms: u64,
    pub mean_wall_ms: f64,
    pub min_wall_ms: f64,
    pub max_wall_ms: f64,
    pub peak_rss_bytes: Option<u64>,
}

/// Runs the matrix; `progress` sees each row as it completes.
pub fn run_bench(m: &BenchMatrix, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for (model, n, bw) in m.cells() {
        let cfg = m.cell_config(model, n, bw);
        let mut walls = Vec::new();
        let mut peak = None;
        for _ in 0..m.repetitions.max(1) {
            mem::reset_peak_rss();
            let out = run::run(&cfg, None)?;
            walls.push(out.runtime.wall_ms);
            peak = peak.max(out.runtime.peak_rss_bytes);
        }
        let row = BenchRow {
            channel_model: model,
            n_vehicles: n,
            bandwidth_mhz: bw,
            repetitions: walls.len() as u32,
            sim_duration_ms: cfg.sim.sim_duration_ms,
            mean_wall_ms: walls.iter().sum::<f64>() / walls.len() as f64,
            min_wall_ms: walls.iter().copied().fold(f64::INFINITY, f64::min),
            max_wall_ms: walls.iter().copied().fold(0.0, f64::max),
            peak_rss_bytes: peak,
        };
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(
        "channel_model,n_vehicles,bandwidth_mhz,repetitions,sim_duration_ms,mean_wall_s,min_wall_s,max_wall_s,peak_rss_bytes\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.3},{:.3},{:.3},{}",
            r.channel_model.name(),
            r.n_vehicles,
            r.bandwidth_mhz.mhz(),
            r.repetitions,
            r.sim_duration_ms,
            r.mean_wall_ms / 1000.0,
            r.min_wall_ms / 1000.0,
            r.max_wall_ms / 1000.0,
            r.peak_rss_bytes.map(|p| p.to_string()).unwrap_or_default()
        );
    }
    s
}
