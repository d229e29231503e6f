//! Sensing-based semi-persistent scheduling (SB-SPS).
//!
//! A vehicle that needs a resource at time `T` opens a selection window
//! `[T + 1, T + latency]`, starts from every CSR in it (set A) and removes
//!
//! 1. every CSR in a subframe that lines up, modulo the RRI, with one of
//!    its own transmissions in the trailing sensing window (it was deaf
//!    there), and
//! 2. every CSR overlapping a decoded reservation whose RSRP exceeds the
//!    current threshold.
//!
//! The threshold rises in 3 dB steps until at least 20 % of the window
//! survives. Set B keeps exactly 20 % of the window, the survivors with the
//! lowest linear-average RSSI, and one CSR is drawn uniformly from it.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel;
use crate::error::{Error, Result};
use crate::grid::{self, Csr, SelectionWindow};
use crate::params::SimParams;
use crate::units::{db_to_lin, lin_to_db};

/// RSRP threshold step of the exclusion loop.
pub const THRESHOLD_STEP_DB: f64 = 3.0;

/// One sensed transmission as seen by the MAC of a receiving vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensedEntry {
    pub subframe: u64,
    pub csr: Csr,
    pub rsrp_dbm: f64,
    /// Total received power on the entry's subchannels.
    pub rssi_dbm: f64,
    /// SCI and transport block decoded.
    pub decoded: bool,
    pub source_id: u32,
}

#[derive(Debug, Clone, Default)]
struct Slot {
    /// Absolute subframe the slot currently describes.
    subframe: Option<u64>,
    own_tx: bool,
    entries: Vec<SensedEntry>,
}

/// Trailing sensing history of one vehicle, kept as a ring of one slot
/// per subframe. Slots older than the horizon are overwritten on write and
/// ignored on read.
#[derive(Debug, Clone)]
pub struct SensingWindow {
    owner_id: u32,
    horizon_ms: u32,
    slots: Vec<Slot>,
}

impl SensingWindow {
    pub fn new(owner_id: u32, horizon_ms: u32) -> Self {
        assert!(horizon_ms > 0);
        SensingWindow {
            owner_id,
            horizon_ms,
            slots: vec![Slot::default(); horizon_ms as usize],
        }
    }

    pub fn owner_id(&self) -> u32 {
        self.owner_id
    }

    pub fn horizon_ms(&self) -> u32 {
        self.horizon_ms
    }

    fn slot_mut(&mut self, subframe: u64) -> Option<&mut Slot> {
        let idx = (subframe % self.horizon_ms as u64) as usize;
        let slot = &mut self.slots[idx];
        match slot.subframe {
            Some(s) if s == subframe => Some(slot),
            Some(s) if s > subframe => None,
            _ => {
                slot.subframe = Some(subframe);
                slot.own_tx = false;
                slot.entries.clear();
                Some(slot)
            }
        }
    }

    fn slot(&self, subframe: u64, now: u64) -> Option<&Slot> {
        if subframe >= now || subframe + (self.horizon_ms as u64) < now {
            return None;
        }
        let slot = &self.slots[(subframe % self.horizon_ms as u64) as usize];
        (slot.subframe == Some(subframe)).then_some(slot)
    }

    pub fn record_sensed(&mut self, entry: SensedEntry) {
        if let Some(slot) = self.slot_mut(entry.subframe) {
            slot.entries.push(entry);
        }
    }

    pub fn record_own_tx(&mut self, subframe: u64) {
        if let Some(slot) = self.slot_mut(subframe) {
            slot.own_tx = true;
        }
    }

    /// Subframes visible from `now`: `[now - horizon, now)`, clipped at 0.
    pub fn visible_range(&self, now: u64) -> core::ops::Range<u64> {
        now.saturating_sub(self.horizon_ms as u64)..now
    }

    pub fn entries_at(&self, subframe: u64, now: u64) -> &[SensedEntry] {
        self.slot(subframe, now).map_or(&[], |s| &s.entries)
    }

    pub fn own_tx_at(&self, subframe: u64, now: u64) -> bool {
        self.slot(subframe, now).is_some_and(|s| s.own_tx)
    }

    pub fn entries(&self, now: u64) -> impl Iterator<Item = &SensedEntry> + '_ {
        self.visible_range(now)
            .flat_map(move |sf| self.entries_at(sf, now).iter())
    }

    pub fn own_tx_subframes(&self, now: u64) -> Vec<u64> {
        self.visible_range(now)
            .filter(|&sf| self.own_tx_at(sf, now))
            .collect()
    }

    pub fn len(&self, now: u64) -> usize {
        self.entries(now).count()
    }

    pub fn is_empty(&self, now: u64) -> bool {
        self.len(now) == 0
    }
}

/// Per-vehicle reservation state. `slrrc == -1` means never scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpsState {
    pub slrrc: i32,
    /// Last CSR the vehicle transmitted on; the pattern repeats every RRI.
    pub reserved: Option<Csr>,
}

impl Default for SpsState {
    fn default() -> Self {
        SpsState {
            slrrc: -1,
            reserved: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub window: SelectionWindow,
    pub all: Vec<Csr>,
    pub set_a: Vec<Csr>,
    pub set_b: Vec<Csr>,
    /// Threshold at which set A reached its minimum size.
    pub threshold_dbm: f64,
}

impl CandidateSet {
    /// `ceil(0.2 * M)`: the minimum size of set A and the exact size of set B.
    pub fn target_size(&self) -> usize {
        target_size(self.all.len())
    }
}

pub fn target_size(m: usize) -> usize {
    m.div_ceil(5)
}

/// Window subframes congruent to `sensed_subframe` modulo the RRI.
pub fn project_to_window(sensed_subframe: u64, window: SelectionWindow, rri_ms: u32) -> Vec<u64> {
    let rri = rri_ms as u64;
    let mut out = Vec::new();
    if window.is_empty() || rri == 0 {
        return out;
    }
    let mut s = if sensed_subframe >= window.start_subframe {
        sensed_subframe
    } else {
        let k = (window.start_subframe - sensed_subframe).div_ceil(rri);
        sensed_subframe + k * rri
    };
    while s <= window.end_subframe {
        out.push(s);
        s += rri;
    }
    out
}

/// Builds set A with threshold escalation. `now` is the scheduling time
/// `T = window.start - 1`.
pub fn build_set_a(
    win: &SensingWindow,
    window: SelectionWindow,
    params: &SimParams,
    initial_threshold_dbm: f64,
) -> Result<CandidateSet> {
    let all = grid::enumerate_csrs(window, params)?;
    let starts = grid::candidate_starts(params)?;
    let n_starts = starts.len();
    let now = window.start_subframe.saturating_sub(1);
    let index = |sf: u64, start: u16| (sf - window.start_subframe) as usize * n_starts + start as usize;

    let mut own_excluded = vec![false; all.len()];
    let mut max_rsrp = vec![f64::NEG_INFINITY; all.len()];

    for sf in win.visible_range(now) {
        let own = win.own_tx_at(sf, now);
        let entries = win.entries_at(sf, now);
        if !own && entries.iter().all(|e| !e.decoded) {
            continue;
        }
        for p in project_to_window(sf, window, params.rri_ms) {
            if own {
                own_excluded[index(p, 0)..index(p, 0) + n_starts].fill(true);
            }
            for e in entries.iter().filter(|e| e.decoded) {
                let probe = e.csr;
                for start in starts.clone() {
                    let cand = Csr::new(p, start, params.packet_subchannels as u16);
                    if cand.overlaps_span(&probe) {
                        let slot = &mut max_rsrp[index(p, start)];
                        *slot = slot.max(e.rsrp_dbm);
                    }
                }
            }
        }
    }

    let need = target_size(all.len());
    let available = own_excluded.iter().filter(|x| !**x).count();
    if available < need {
        return Err(Error::invariant(alloc::format!(
            "own-transmission exclusions leave {available} of {} candidates, need {need}",
            all.len()
        )));
    }

    let mut threshold = initial_threshold_dbm;
    loop {
        let kept = own_excluded
            .iter()
            .zip(&max_rsrp)
            .filter(|(own, r)| !**own && **r <= threshold)
            .count();
        if kept >= need {
            break;
        }
        threshold += THRESHOLD_STEP_DB;
    }

    let set_a = all
        .iter()
        .enumerate()
        .filter(|(i, _)| !own_excluded[*i] && max_rsrp[*i] <= threshold)
        .map(|(_, c)| *c)
        .collect();

    Ok(CandidateSet {
        window,
        all,
        set_a,
        set_b: Vec::new(),
        threshold_dbm: threshold,
    })
}

/// Linear-average RSSI of a candidate over its periodic occurrences in the
/// sensing window, in dBm. Unmeasured occurrences count as `noise_dbm`.
pub fn average_rssi_dbm(win: &SensingWindow, cand: &Csr, now: u64, rri_ms: u32, noise_dbm: f64) -> f64 {
    let noise = db_to_lin(noise_dbm);
    let rri = rri_ms as u64;
    let range = win.visible_range(now);
    let (mut sum, mut count) = (0.0, 0u32);
    let mut sf = cand.subframe;
    while sf >= rri && sf - rri >= range.start {
        sf -= rri;
        if sf >= range.end {
            continue;
        }
        let (mut occ, mut hits) = (0.0, 0u32);
        for e in win.entries_at(sf, now) {
            if e.csr.overlaps_span(cand) {
                occ += db_to_lin(e.rssi_dbm);
                hits += 1;
            }
        }
        sum += if hits == 0 { noise } else { occ / hits as f64 };
        count += 1;
    }
    if count == 0 {
        noise_dbm
    } else {
        lin_to_db(sum / count as f64)
    }
}

/// Keeps the `ceil(0.2 M)` candidates of set A with the lowest average
/// RSSI; ties go to the canonically smaller CSR. Set B is stored in
/// canonical order.
pub fn build_set_b(mut cands: CandidateSet, win: &SensingWindow, params: &SimParams) -> Result<CandidateSet> {
    let need = cands.target_size();
    if cands.set_a.len() < need {
        return Err(Error::invariant(alloc::format!(
            "set A holds {} candidates, need at least {need}",
            cands.set_a.len()
        )));
    }
    let now = cands.window.start_subframe.saturating_sub(1);
    let noise = channel::noise_power_dbm(params);
    let mut ranked: Vec<(f64, Csr)> = cands
        .set_a
        .iter()
        .map(|c| (average_rssi_dbm(win, c, now, params.rri_ms, noise), *c))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut set_b: Vec<Csr> = ranked.into_iter().take(need).map(|(_, c)| c).collect();
    set_b.sort();
    cands.set_b = set_b;
    Ok(cands)
}

pub fn select_csr<R: Rng + ?Sized>(cands: &CandidateSet, rng: &mut R) -> Result<Csr> {
    if cands.set_b.is_empty() {
        return Err(Error::invariant("set B is empty"));
    }
    Ok(cands.set_b[rng.gen_range(0..cands.set_b.len())])
}

/// Runs the full procedure for a packet generated at `now`.
pub fn select_resource<R: Rng + ?Sized>(
    win: &SensingWindow,
    now: u64,
    params: &SimParams,
    rng: &mut R,
) -> Result<(CandidateSet, Csr)> {
    let window = SelectionWindow::after(now, params.latency_ms());
    let cands = build_set_a(win, window, params, params.sps_threshold_dbm)?;
    let cands = build_set_b(cands, win, params)?;
    let csr = select_csr(&cands, rng)?;
    Ok((cands, csr))
}

pub fn draw_slrrc<R: Rng + ?Sized>(params: &SimParams, rng: &mut R) -> u32 {
    rng.gen_range(params.slrrc_min..=params.slrrc_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reselection {
    KeepCsr,
    Reselect,
}

/// Coin flip when the reselection counter expires: keep the resource with
/// probability `p_resel`.
pub fn on_counter_zero<R: Rng + ?Sized>(state: &SpsState, p_resel: f64, rng: &mut R) -> Result<Reselection> {
    if state.slrrc != 0 {
        return Err(Error::invariant(alloc::format!(
            "reselection decision with slrrc = {}",
            state.slrrc
        )));
    }
    Ok(if rng.gen::<f64>() < p_resel {
        Reselection::KeepCsr
    } else {
        Reselection::Reselect
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::VehicleRng;
    use rand::SeedableRng;

    fn rng(seed: u64) -> VehicleRng {
        VehicleRng::seed_from_u64(seed)
    }

    fn entry(sf: u64, start: u16, rsrp: f64, rssi: f64, decoded: bool) -> SensedEntry {
        SensedEntry {
            subframe: sf,
            csr: Csr::new(sf, start, 2),
            rsrp_dbm: rsrp,
            rssi_dbm: rssi,
            decoded,
            source_id: 9,
        }
    }

    #[test]
    fn window_recording_and_horizon() {
        let mut w = SensingWindow::new(0, 1000);
        assert!(w.is_empty(2000));
        w.record_sensed(entry(1500, 0, -90.0, -88.0, true));
        assert_eq!(w.len(1501), 1);
        assert_eq!(w.len(2500), 1);
        // T - 1001 is outside [T - 1000, T)
        assert_eq!(w.len(2501), 0);
        // not yet visible at its own subframe
        assert_eq!(w.len(1500), 0);
        w.record_own_tx(1700);
        assert_eq!(w.own_tx_subframes(1800), [1700]);
        assert!(w.own_tx_at(1700, 2700));
        assert!(!w.own_tx_at(1700, 2701));
    }

    #[test]
    fn ring_slot_reuse_drops_stale_data() {
        let mut w = SensingWindow::new(0, 1000);
        w.record_sensed(entry(5, 0, -90.0, -88.0, true));
        w.record_own_tx(5);
        w.record_sensed(entry(1005, 1, -91.0, -89.0, true));
        assert_eq!(w.entries_at(1005, 1006).len(), 1);
        assert!(!w.own_tx_at(1005, 1006));
        // writing an older subframe into a newer slot is ignored
        w.record_sensed(entry(5, 0, -90.0, -88.0, true));
        assert_eq!(w.entries_at(1005, 1006).len(), 1);
    }

    #[test]
    fn projection() {
        let w = SelectionWindow {
            start_subframe: 1001,
            end_subframe: 1100,
        };
        assert_eq!(project_to_window(950, w, 100), [1050]);
        assert_eq!(project_to_window(1000, w, 100), [1100]);
        assert_eq!(project_to_window(1, w, 100), [1001]);
        for s in 0..1001 {
            assert_eq!(project_to_window(s, w, 100).len(), 1);
        }
        let short = SelectionWindow {
            start_subframe: 1001,
            end_subframe: 1020,
        };
        assert!(project_to_window(950, short, 100).is_empty());
        assert_eq!(project_to_window(990, short, 10), (1000..=1020).step_by(10).skip(1).collect::<Vec<_>>());
    }

    #[test]
    fn empty_window_keeps_everything() {
        let p = SimParams::default();
        let w = SensingWindow::new(0, 1000);
        let win = SelectionWindow::after(1000, 100);
        let c = build_set_a(&w, win, &p, -110.0).unwrap();
        assert_eq!(c.all.len(), 400);
        assert_eq!(c.set_a, c.all);
        assert_eq!(c.threshold_dbm, -110.0);
        let c = build_set_b(c, &w, &p).unwrap();
        assert_eq!(c.set_b.len(), 80);
        // all tie at the noise floor: canonical first 80
        assert_eq!(c.set_b[..], c.all[..80]);
    }

    #[test]
    fn own_tx_excludes_projected_subframe() {
        let p = SimParams::default();
        let mut w = SensingWindow::new(0, 1000);
        w.record_own_tx(950);
        let win = SelectionWindow::after(1000, 100);
        let c = build_set_a(&w, win, &p, -110.0).unwrap();
        assert_eq!(c.set_a.len(), 396);
        assert!(c.set_a.iter().all(|x| x.subframe != 1050));
    }

    #[test]
    fn threshold_escalates_in_3db_steps() {
        let p = SimParams::default();
        let mut w = SensingWindow::new(0, 1000);
        // cover every candidate: spans {0,1} and {2,3} at every residue,
        // plus {3,4}, each decoded at -80 dBm
        for sf in 901..=1000 {
            for start in [0, 2, 3] {
                w.record_sensed(entry(sf, start, -80.0, -79.0, true));
            }
        }
        let win = SelectionWindow::after(1000, 100);
        let c = build_set_a(&w, win, &p, -110.0).unwrap();
        // first threshold not below -80 is -110 + 3k >= -80, k = 10
        assert_eq!(c.threshold_dbm, -80.0);
        assert_eq!(c.set_a.len(), 400);
    }

    #[test]
    fn partial_escalation() {
        let p = SimParams::default();
        let mut w = SensingWindow::new(0, 1000);
        // strong users everywhere except 10 subframes, weaker there
        for sf in 901..=1000 {
            let rsrp = if sf <= 910 { -100.0 } else { -60.0 };
            for start in [0, 2, 3] {
                w.record_sensed(entry(sf, start, rsrp, rsrp + 1.0, true));
            }
        }
        let win = SelectionWindow::after(1000, 100);
        let c = build_set_a(&w, win, &p, -110.0).unwrap();
        // at -98 the 10 weak subframes (40 CSRs) open up, short of 80;
        // escalation continues until -62 + 3 > -60 ... i.e. -59
        assert_eq!(c.threshold_dbm, -59.0);
        assert!(((c.threshold_dbm + 110.0) / 3.0).fract() == 0.0);
    }

    #[test]
    fn set_b_avoids_loud_candidate() {
        let p = SimParams::default();
        let noise = channel::noise_power_dbm(&p);
        let mut w = SensingWindow::new(0, 1000);
        // undecoded occupant 10 dB above noise on subchannels {0,1} at residue 1
        w.record_sensed(entry(901, 0, noise + 7.0, noise + 10.0, false));
        let win = SelectionWindow::after(1000, 100);
        let c = build_set_b(build_set_a(&w, win, &p, -110.0).unwrap(), &w, &p).unwrap();
        assert_eq!(c.set_a.len(), 400);
        assert_eq!(c.set_b.len(), 80);
        // candidates at 1001 overlapping {0,1} are starts 0 and 1
        assert!(!c.set_b.contains(&Csr::new(1001, 0, 2)));
        assert!(!c.set_b.contains(&Csr::new(1001, 1, 2)));
        assert!(c.set_b.contains(&Csr::new(1001, 2, 2)));
    }

    #[test]
    fn average_rssi_counts_noise_for_gaps() {
        let p = SimParams::default();
        let noise = channel::noise_power_dbm(&p);
        let mut w = SensingWindow::new(0, 1000);
        w.record_sensed(entry(950, 0, -80.0, noise + 10.0, true));
        let cand = Csr::new(1050, 1, 2);
        let avg = average_rssi_dbm(&w, &cand, 1000, 100, noise);
        // one of ten occurrences at 10x noise: mean = 1.9x noise
        assert!((avg - (noise + lin_to_db(1.9))).abs() < 1e-9);
        // before time zero there is nothing to average
        let early = average_rssi_dbm(&w, &Csr::new(50, 0, 2), 0, 100, noise);
        assert_eq!(early, noise);
    }

    #[test]
    fn own_tx_everywhere_is_an_error() {
        let p = SimParams::default();
        let mut w = SensingWindow::new(0, 1000);
        for sf in 901..=990 {
            w.record_own_tx(sf);
        }
        let win = SelectionWindow::after(1000, 100);
        assert!(matches!(build_set_a(&w, win, &p, -110.0), Err(Error::Invariant(_))));
    }

    #[test]
    fn select_from_singleton_and_empty() {
        let mut c = CandidateSet {
            window: SelectionWindow::after(0, 1),
            all: vec![Csr::new(1, 0, 2)],
            set_a: vec![Csr::new(1, 0, 2)],
            set_b: vec![Csr::new(1, 0, 2)],
            threshold_dbm: -110.0,
        };
        assert_eq!(select_csr(&c, &mut rng(1)).unwrap(), Csr::new(1, 0, 2));
        c.set_b.clear();
        assert!(select_csr(&c, &mut rng(1)).is_err());
    }

    #[test]
    fn select_is_uniform_and_seeded() {
        let p = SimParams::default();
        let w = SensingWindow::new(0, 1000);
        let (c, first) = select_resource(&w, 1000, &p, &mut rng(42)).unwrap();
        assert_eq!(select_resource(&w, 1000, &p, &mut rng(42)).unwrap().1, first);
        let mut r = rng(7);
        let mut counts = [0u32; 80];
        let n = 100_000;
        for _ in 0..n {
            let csr = select_csr(&c, &mut r).unwrap();
            counts[c.set_b.binary_search(&csr).unwrap()] += 1;
        }
        let pk = 1.0 / 80.0;
        let sigma = (n as f64 * pk * (1.0 - pk)).sqrt();
        for k in counts {
            assert!((k as f64 - n as f64 * pk).abs() < 4.0 * sigma, "{k}");
        }
    }

    #[test]
    fn slrrc_range_and_uniformity() {
        let p = SimParams::default();
        let mut r = rng(3);
        let n = 1_000_000;
        let mut counts = [0u32; 11];
        for _ in 0..n {
            let v = draw_slrrc(&p, &mut r);
            assert!((5..=15).contains(&v));
            counts[(v - 5) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 11.0).abs() < 0.002);
        }
        assert_eq!(draw_slrrc(&p, &mut rng(9)), draw_slrrc(&p, &mut rng(9)));
    }

    #[test]
    fn reselection_coin() {
        let zero = SpsState {
            slrrc: 0,
            reserved: Some(Csr::new(10, 0, 2)),
        };
        let mut r = rng(5);
        for _ in 0..1000 {
            assert_eq!(on_counter_zero(&zero, 1.0, &mut r).unwrap(), Reselection::KeepCsr);
            assert_eq!(on_counter_zero(&zero, 0.0, &mut r).unwrap(), Reselection::Reselect);
        }
        let n = 100_000;
        let keep = (0..n)
            .filter(|_| on_counter_zero(&zero, 0.8, &mut r).unwrap() == Reselection::KeepCsr)
            .count();
        assert!((keep as f64 / n as f64 - 0.8).abs() < 0.01);
        let busy = SpsState { slrrc: 3, ..zero };
        assert!(on_counter_zero(&busy, 0.8, &mut r).is_err());
    }
}
