//! One configured run: engine, optional emission, exports.

use std::path::Path;
use std::time::Instant;

use cv2x_core::MetricsReport;

use crate::config::RunConfig;
use crate::error::Result;
use crate::export::{self, Runtime};
use crate::hil::{self, DatagramSink, PacingStats};
use crate::mem;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub runtime: Runtime,
    pub pacing: Option<PacingStats>,
}

/// Runs to completion. With `emit`, decoded HV packets go to the sink,
/// paced per the config's `pacing` section.
pub fn run(cfg: &RunConfig, emit: Option<&mut dyn DatagramSink>) -> Result<RunOutput> {
    cfg.validate()?;
    let engine = cfg.engine()?;
    let n_vehicles = engine.n_vehicles() as u32;
    let t0 = Instant::now();
    let (report, pacing) = match emit {
        Some(sink) => {
            let pc = cfg.pacing.clone().unwrap_or_default();
            let (r, s) = hil::pace_and_emit(engine, &pc, sink)?;
            (r, Some(s))
        }
        None => (engine.run(&mut ())?, None),
    };
    let wall_ms = t0.elapsed().as_secs_f64() * 1000.0;
    Ok(RunOutput {
        runtime: Runtime {
            sim_duration_ms: cfg.sim.sim_duration_ms,
            wall_ms,
            n_vehicles,
            peak_rss_bytes: mem::peak_rss_bytes(),
        },
        report,
        pacing,
    })
}

/// Metric files plus the effective config.
pub fn write_outputs(cfg: &RunConfig, out: &RunOutput, dir: &Path) -> Result<()> {
    export::export(&out.report, &out.runtime, dir)?;
    export::write_config(cfg, dir)
}

/// PER of the bin ending at `distance_m`, e.g. `[575, 600)` for 600 m.
pub fn per_ending_at(report: &MetricsReport, distance_m: f64) -> Option<f64> {
    report
        .per_bins
        .iter()
        .find(|b| b.end_m >= distance_m && b.start_m < distance_m)
        .and_then(|b| b.per())
}

pub fn summary(out: &RunOutput) -> String {
    let mut s = String::new();
    let pct = |p: Option<f64>| p.map(|p| format!("{:.1}%", p * 100.0)).unwrap_or_else(|| "n/a".into());
    let per: Vec<String> = [100.0, 300.0, 600.0]
        .iter()
        .map(|&d| format!("{d:.0} m {}", pct(per_ending_at(&out.report, d))))
        .collect();
    s.push_str(&format!("PER: {}\n", per.join(", ")));
    let ipg: Vec<String> = cv2x_core::metrics::IPG_BIN_LABELS
        .iter()
        .zip(out.report.ipg_by_distance())
        .map(|(l, h)| match h.mean_ms {
            Some(m) => format!("{l} m {m:.1} ms"),
            None => format!("{l} m n/a"),
        })
        .collect();
    s.push_str(&format!("mean IPG: {}\n", ipg.join(", ")));
    let c = &out.report.counts;
    s.push_str(&format!(
        "HV receptions: {} sent, {} decoded, {} half-duplex, {} propagation, {} collision\n",
        c.sent, c.decoded, c.half_duplex, c.propagation, c.collision
    ));
    s.push_str(&format!(
        "wall time: {:.3} s for {:.1} s simulated, {} vehicles",
        out.runtime.wall_ms / 1000.0,
        out.runtime.sim_duration_ms as f64 / 1000.0,
        out.runtime.n_vehicles
    ));
    if let Some(p) = out.runtime.peak_rss_bytes {
        s.push_str(&format!(", peak RSS {:.1} MiB", p as f64 / (1024.0 * 1024.0)));
    }
    if let Some(ps) = &out.pacing {
        s.push_str(&format!("\nemitted {} datagrams", ps.emitted));
        if let (Some(p99), Some(max)) = (ps.lag_quantile_ms(0.99), ps.max_lag_ms()) {
            s.push_str(&format!(", emission lag p99 {p99:.3} ms, max {max:.3} ms"));
        }
    }
    s
}
