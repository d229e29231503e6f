//! Metric files written to a run's output directory.

use std::fmt::Write as _;
use std::path::Path;

use cv2x_core::metrics::IPG_BIN_LABELS;
use cv2x_core::MetricsReport;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PER_FILE: &str = "per_by_distance.csv";
pub const IPG_FILE: &str = "ipg.csv";
pub const RSSI_FILE: &str = "rssi_scatter.csv";
pub const RUNTIME_FILE: &str = "runtime.json";
pub const CONFIG_FILE: &str = "effective_config.json";

/// Wall-clock side of a run; kept apart from the deterministic metric files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub sim_duration_ms: u64,
    pub wall_ms: f64,
    pub n_vehicles: u32,
    pub peak_rss_bytes: Option<u64>,
}

pub fn per_csv(report: &MetricsReport) -> String {
    let mut s = String::from("bin_start_m,bin_end_m,sent,failed,per\n");
    for b in &report.per_bins {
        let per = b.per().map(|p| format!("{p:.6}")).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{}", b.start_m, b.end_m, b.sent, b.failed, per);
    }
    s
}

pub fn ipg_csv(report: &MetricsReport) -> String {
    let mut s = String::from("bin,gap_ms,count\n");
    for (label, h) in IPG_BIN_LABELS.iter().zip(report.ipg_by_distance()) {
        for (gap, count) in &h.counts {
            let _ = writeln!(s, "{label},{gap},{count}");
        }
    }
    s
}

pub fn rssi_csv(report: &MetricsReport) -> String {
    let mut s = String::from("distance_m,rssi_dbm\n");
    for r in &report.rssi {
        let _ = writeln!(s, "{:.3},{:.3}", r.distance_m, r.rssi_dbm);
    }
    s
}

pub fn runtime_json(rt: &Runtime) -> String {
    let mut s = serde_json::to_string(rt).expect("runtime serializes");
    s.push('\n');
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

pub fn export(report: &MetricsReport, runtime: &Runtime, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, PER_FILE, &per_csv(report))?;
    write(dir, IPG_FILE, &ipg_csv(report))?;
    write(dir, RSSI_FILE, &rssi_csv(report))?;
    write(dir, RUNTIME_FILE, &runtime_json(runtime))
}

pub fn write_config(cfg: &crate::config::RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, CONFIG_FILE, &cfg.effective()?.to_json_pretty())
}
