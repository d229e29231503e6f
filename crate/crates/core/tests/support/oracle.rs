//! Exhaustive reference implementation of the SB-SPS candidate rules and a
//! generator of small random scheduling instances.
//!
//! Everything here works on flat lists and checks every candidate against
//! every sensed entry; it shares no code with the production ring buffer
//! or projection helpers.

#![allow(dead_code)]

use std::collections::BTreeSet;

use cv2x_core::channel;
use cv2x_core::grid::{Csr, SelectionWindow};
use cv2x_core::params::{Bandwidth, SimParams};
use cv2x_core::rng;
use cv2x_core::sbsps::{self, SensedEntry, SensingWindow};
use cv2x_core::units::{db_to_lin, lin_to_db};

/// splitmix64, so the generator does not depend on the crate's RNG.
pub struct Gen(u64);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[lo, hi]`.
    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.next_u64() % (hi - lo + 1)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn pick<T: Copy>(&mut self, xs: &[T]) -> T {
        xs[self.range(0, xs.len() as u64 - 1) as usize]
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub params: SimParams,
    pub now: u64,
    pub window: SelectionWindow,
    pub own_tx: Vec<u64>,
    pub entries: Vec<SensedEntry>,
    pub initial_threshold_dbm: f64,
}

pub fn n_subchannels(p: &SimParams) -> u16 {
    (p.bandwidth_mhz.total_rbs() / p.rbs_per_subchannel) as u16
}

/// Selection window of at most 12 subframes, at most 5 subchannels (so at
/// most 60 candidates) and at most 30 sensed entries.
pub fn random_instance(seed: u64) -> Instance {
    let mut g = Gen::new(seed);
    let (bandwidth_mhz, rbs) = if g.range(0, 1) == 0 {
        (Bandwidth::Mhz10, g.pick(&[10, 12, 16, 25, 50]))
    } else {
        (Bandwidth::Mhz20, g.pick(&[20, 25, 34, 50, 100]))
    };
    let mut params = SimParams {
        bandwidth_mhz,
        rbs_per_subchannel: rbs,
        rri_ms: g.pick(&[3, 5, 7, 10, 20]),
        sensing_window_ms: g.range(10, 80) as u32,
        ..SimParams::default()
    };
    let n = n_subchannels(&params);
    params.packet_subchannels = g.range(1, n as u64) as u32;

    let now = g.range(0, 120);
    let len = g.range(1, 12);
    let window = SelectionWindow {
        start_subframe: now + 1,
        end_subframe: now + len,
    };
    let lo = now.saturating_sub(params.sensing_window_ms as u64);

    let mut own_tx = Vec::new();
    if now > lo {
        for _ in 0..g.range(0, 2) {
            own_tx.push(g.range(lo, now - 1));
        }
    }
    own_tx.sort_unstable();
    own_tx.dedup();

    let mut entries = Vec::new();
    if now > lo {
        for _ in 0..g.range(0, 30) {
            let subframe = g.range(lo, now - 1);
            if own_tx.contains(&subframe) {
                continue;
            }
            let l = if g.unit() < 0.7 {
                params.packet_subchannels as u16
            } else {
                g.range(1, n as u64) as u16
            };
            let start = g.range(0, (n - l) as u64) as u16;
            let rsrp = -125.0 + 55.0 * g.unit();
            entries.push(SensedEntry {
                subframe,
                csr: Csr::new(subframe, start, l),
                rsrp_dbm: rsrp,
                rssi_dbm: rsrp + 12.0 * g.unit(),
                decoded: g.unit() < 0.7,
                source_id: g.range(1, 9) as u32,
            });
        }
    }
    // entries reach the sensing window in subframe order
    entries.sort_by_key(|e| e.subframe);

    Instance {
        params,
        now,
        window,
        own_tx,
        entries,
        initial_threshold_dbm: g.range(0, 30) as f64 - 125.0,
    }
}

impl Instance {
    pub fn sensing_window(&self) -> SensingWindow {
        let mut w = SensingWindow::new(7, self.params.sensing_window_ms);
        let mut own = self.own_tx.iter().peekable();
        for e in &self.entries {
            while let Some(&&s) = own.peek().filter(|s| ***s <= e.subframe) {
                w.record_own_tx(s);
                own.next();
            }
            w.record_sensed(*e);
        }
        for &s in own {
            w.record_own_tx(s);
        }
        w
    }

    fn visible(&self, subframe: u64) -> bool {
        subframe < self.now && subframe + self.params.sensing_window_ms as u64 >= self.now
    }

    fn periodic_match(&self, cand_subframe: u64, sensed_subframe: u64) -> bool {
        let rri = self.params.rri_ms as u64;
        cand_subframe > sensed_subframe && (cand_subframe - sensed_subframe) % rri == 0
    }
}

fn spans_intersect(a: &Csr, b: &Csr) -> bool {
    let a_set: BTreeSet<u16> = (a.subchannel_start..a.subchannel_start + a.subchannel_len).collect();
    (b.subchannel_start..b.subchannel_start + b.subchannel_len).any(|c| a_set.contains(&c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub set_a: Vec<Csr>,
    pub set_b: Vec<Csr>,
    pub threshold_dbm: f64,
}

pub fn all_candidates(inst: &Instance) -> Vec<Csr> {
    let n = n_subchannels(&inst.params);
    let l = inst.params.packet_subchannels as u16;
    let mut out = Vec::new();
    for sf in inst.window.start_subframe..=inst.window.end_subframe {
        for start in 0..=(n - l) {
            out.push(Csr::new(sf, start, l));
        }
    }
    out
}

/// Mean linear RSSI over the candidate's earlier periodic occurrences in
/// the sensing window, in dBm.
pub fn oracle_average_rssi(inst: &Instance, cand: &Csr) -> f64 {
    let noise_dbm = channel::noise_power_dbm(&inst.params);
    let rri = inst.params.rri_ms as u64;
    let mut values = Vec::new();
    let mut k = 1;
    while k * rri <= cand.subframe {
        let occ = cand.subframe - k * rri;
        k += 1;
        if occ >= inst.now {
            continue;
        }
        if !inst.visible(occ) {
            break;
        }
        let hits: Vec<f64> = inst
            .entries
            .iter()
            .filter(|e| e.subframe == occ && spans_intersect(&e.csr, cand))
            .map(|e| db_to_lin(e.rssi_dbm))
            .collect();
        values.push(if hits.is_empty() {
            db_to_lin(noise_dbm)
        } else {
            hits.iter().sum::<f64>() / hits.len() as f64
        });
    }
    if values.is_empty() {
        noise_dbm
    } else {
        lin_to_db(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// `None` when own-transmission exclusions alone leave fewer than
/// `ceil(0.2 M)` candidates.
pub fn oracle(inst: &Instance) -> Option<OracleResult> {
    let all = all_candidates(inst);
    let need = (all.len() + 4) / 5;

    let deaf = |c: &Csr| {
        inst.own_tx
            .iter()
            .any(|&s| inst.visible(s) && inst.periodic_match(c.subframe, s))
    };
    let blocked = |c: &Csr, threshold: f64| {
        inst.entries.iter().any(|e| {
            e.decoded
                && inst.visible(e.subframe)
                && inst.periodic_match(c.subframe, e.subframe)
                && spans_intersect(&e.csr, c)
                && e.rsrp_dbm > threshold
        })
    };

    if all.iter().filter(|c| !deaf(c)).count() < need {
        return None;
    }

    let mut steps = 0u32;
    let (set_a, threshold_dbm) = loop {
        let threshold = inst.initial_threshold_dbm + 3.0 * steps as f64;
        let a: Vec<Csr> = all
            .iter()
            .filter(|c| !deaf(c) && !blocked(c, threshold))
            .copied()
            .collect();
        if a.len() >= need {
            break (a, threshold);
        }
        steps += 1;
    };

    let mut ranked: Vec<(f64, Csr)> = set_a.iter().map(|c| (oracle_average_rssi(inst, c), *c)).collect();
    ranked.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap()
            .then(x.1.subframe.cmp(&y.1.subframe))
            .then(x.1.subchannel_start.cmp(&y.1.subchannel_start))
    });
    let mut set_b: Vec<Csr> = ranked.into_iter().take(need).map(|(_, c)| c).collect();
    set_b.sort_by_key(|c| (c.subframe, c.subchannel_start));

    Some(OracleResult {
        set_a,
        set_b,
        threshold_dbm,
    })
}

/// Compares the production scheduler with the oracle on one instance,
/// including the support of the random draw from set B.
pub fn check_instance(seed: u64) -> Result<(), String> {
    let inst = random_instance(seed);
    let win = inst.sensing_window();
    let expected = oracle(&inst);

    let a = sbsps::build_set_a(&win, inst.window, &inst.params, inst.initial_threshold_dbm);
    let (expected, a) = match (expected, a) {
        (None, Err(_)) => return Ok(()),
        (None, Ok(a)) => return Err(format!("seed {seed}: oracle rejects, production built |A| = {}", a.set_a.len())),
        (Some(_), Err(e)) => return Err(format!("seed {seed}: production failed: {e}")),
        (Some(x), Ok(a)) => (x, a),
    };
    if a.all != all_candidates(&inst) {
        return Err(format!("seed {seed}: candidate enumeration differs"));
    }
    if a.set_a != expected.set_a {
        return Err(format!("seed {seed}: set A {:?} != {:?}", a.set_a, expected.set_a));
    }
    if a.threshold_dbm != expected.threshold_dbm {
        return Err(format!(
            "seed {seed}: threshold {} != {}",
            a.threshold_dbm, expected.threshold_dbm
        ));
    }
    let b = sbsps::build_set_b(a, &win, &inst.params).map_err(|e| format!("seed {seed}: {e}"))?;
    if b.set_b != expected.set_b {
        return Err(format!("seed {seed}: set B {:?} != {:?}", b.set_b, expected.set_b));
    }

    let mut r = rng::vehicle_rng(seed, 0);
    let mut seen = BTreeSet::new();
    for _ in 0..40 * b.set_b.len() + 100 {
        let c = sbsps::select_csr(&b, &mut r).map_err(|e| format!("seed {seed}: {e}"))?;
        seen.insert(c);
    }
    let support: BTreeSet<Csr> = expected.set_b.iter().copied().collect();
    if seen != support {
        return Err(format!("seed {seed}: draw support {seen:?} != set B {support:?}"));
    }
    Ok(())
}
