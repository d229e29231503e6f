//! HV-side evaluation metrics: PER by distance, inter-packet gaps and the
//! RSSI scatter.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::phy::{LossCause, ReceptionOutcome};

pub const DEFAULT_PER_BIN_M: f64 = 25.0;

/// Lower edges of the three IPG distance bins; the last is open-ended.
pub const IPG_BIN_EDGES_M: [f64; 3] = [0.0, 150.0, 400.0];
pub const IPG_BIN_LABELS: [&str; 3] = ["0-150", "150-400", "400-inf"];
/// Histogram resolution of IPG values.
pub const IPG_RESOLUTION_MS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerBin {
    pub start_m: f64,
    pub end_m: f64,
    pub sent: u64,
    pub failed: u64,
}

impl PerBin {
    pub fn per(&self) -> Option<f64> {
        (self.sent > 0).then(|| self.failed as f64 / self.sent as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpgSample {
    pub tx_id: u32,
    pub gap_ms: u64,
    pub distance_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiSample {
    pub distance_m: f64,
    pub rssi_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub sent: u64,
    pub decoded: u64,
    pub half_duplex: u64,
    pub propagation: u64,
    pub collision: u64,
}

impl OutcomeCounts {
    pub fn lost(&self) -> u64 {
        self.half_duplex + self.propagation + self.collision
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_vehicles: u32,
    pub sim_duration_ms: u64,
    pub per_bin_width_m: f64,
    pub per_bins: Vec<PerBin>,
    pub ipg: Vec<IpgSample>,
    pub rssi: Vec<RssiSample>,
    pub counts: OutcomeCounts,
    /// Transmissions committed by every vehicle, HV included.
    pub transmissions: u64,
}

impl MetricsReport {
    /// PER of the bin holding `distance_m`.
    pub fn per_at(&self, distance_m: f64) -> Option<f64> {
        let i = (distance_m / self.per_bin_width_m) as usize;
        self.per_bins.get(i).and_then(PerBin::per)
    }

    pub fn ipg_by_distance(&self) -> [IpgHistogram; 3] {
        ipg_by_distance(&self.ipg)
    }
}

#[derive(Debug, Clone)]
pub struct MetricsCollector {
    n_vehicles: u32,
    sim_duration_ms: u64,
    bin_width_m: f64,
    bins: Vec<PerBin>,
    last_decoded_gen: BTreeMap<u32, u64>,
    ipg: Vec<IpgSample>,
    rssi: Vec<RssiSample>,
    counts: OutcomeCounts,
    transmissions: u64,
}

impl MetricsCollector {
    pub fn new(n_vehicles: u32, sim_duration_ms: u64, bin_width_m: f64) -> Self {
        assert!(bin_width_m > 0.0);
        MetricsCollector {
            n_vehicles,
            sim_duration_ms,
            bin_width_m,
            bins: Vec::new(),
            last_decoded_gen: BTreeMap::new(),
            ipg: Vec::new(),
            rssi: Vec::new(),
            counts: OutcomeCounts::default(),
            transmissions: 0,
        }
    }

    fn bin_mut(&mut self, distance_m: f64) -> &mut PerBin {
        let i = (distance_m.max(0.0) / self.bin_width_m) as usize;
        while self.bins.len() <= i {
            let k = self.bins.len() as f64;
            self.bins.push(PerBin {
                start_m: k * self.bin_width_m,
                end_m: (k + 1.0) * self.bin_width_m,
                sent: 0,
                failed: 0,
            });
        }
        &mut self.bins[i]
    }

    /// Records one HV reception. `distance_m` is the link distance at the
    /// transmission subframe; `gen_time_ms` stamps the BSM, and gaps are
    /// taken between generation stamps of consecutive decoded packets.
    pub fn record(&mut self, outcome: &ReceptionOutcome, distance_m: f64, gen_time_ms: u64) {
        let bin = self.bin_mut(distance_m);
        bin.sent += 1;
        if !outcome.decoded {
            bin.failed += 1;
        }
        self.counts.sent += 1;
        match outcome.loss_cause {
            LossCause::None => self.counts.decoded += 1,
            LossCause::HalfDuplex => self.counts.half_duplex += 1,
            LossCause::Propagation => self.counts.propagation += 1,
            LossCause::Collision => self.counts.collision += 1,
        }
        self.rssi.push(RssiSample {
            distance_m,
            rssi_dbm: outcome.rx_power_dbm,
        });
        if outcome.decoded {
            if let Some(prev) = self.last_decoded_gen.insert(outcome.tx_id, gen_time_ms) {
                self.ipg.push(IpgSample {
                    tx_id: outcome.tx_id,
                    gap_ms: gen_time_ms - prev,
                    distance_m,
                });
            }
        }
    }

    pub fn count_transmissions(&mut self, n: u64) {
        self.transmissions += n;
    }

    pub fn finish(self) -> MetricsReport {
        MetricsReport {
            n_vehicles: self.n_vehicles,
            sim_duration_ms: self.sim_duration_ms,
            per_bin_width_m: self.bin_width_m,
            per_bins: self.bins,
            ipg: self.ipg,
            rssi: self.rssi,
            counts: self.counts,
            transmissions: self.transmissions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IpgHistogram {
    /// Gap (floored to 100 ms) to count.
    pub counts: BTreeMap<u64, u64>,
    pub n: u64,
    pub mean_ms: Option<f64>,
    pub median_ms: Option<u64>,
    pub p95_ms: Option<u64>,
}

impl IpgHistogram {
    fn from_gaps(mut gaps: Vec<u64>) -> Self {
        let mut h = IpgHistogram::default();
        if gaps.is_empty() {
            return h;
        }
        gaps.sort_unstable();
        for &g in &gaps {
            *h.counts.entry(g / IPG_RESOLUTION_MS * IPG_RESOLUTION_MS).or_default() += 1;
        }
        h.n = gaps.len() as u64;
        h.mean_ms = Some(gaps.iter().sum::<u64>() as f64 / gaps.len() as f64);
        h.median_ms = Some(nearest_rank(&gaps, 0.5));
        h.p95_ms = Some(nearest_rank(&gaps, 0.95));
        h
    }

    /// Fraction of samples in the `gap_ms` bucket.
    pub fn fraction_at(&self, gap_ms: u64) -> Option<f64> {
        (self.n > 0).then(|| *self.counts.get(&gap_ms).unwrap_or(&0) as f64 / self.n as f64)
    }
}

fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    let rank = libm::ceil(q * sorted.len() as f64) as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn ipg_bin_index(distance_m: f64) -> usize {
    IPG_BIN_EDGES_M.iter().rposition(|&e| distance_m >= e).unwrap_or(0)
}

/// Splits gaps into the `[0,150)`, `[150,400)` and `[400,inf)` m bins.
pub fn ipg_by_distance(samples: &[IpgSample]) -> [IpgHistogram; 3] {
    let mut gaps: [Vec<u64>; 3] = Default::default();
    for s in samples {
        gaps[ipg_bin_index(s.distance_m)].push(s.gap_ms);
    }
    gaps.map(IpgHistogram::from_gaps)
}
