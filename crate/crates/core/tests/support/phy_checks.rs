//! PHY invariants as plain functions over generated inputs.

#![allow(dead_code)]

use cv2x_core::grid::Csr;
use cv2x_core::params::SinrCombining;
use cv2x_core::phy::{self, BlerTable, LinkQuality, RxSignal};

/// `(subchannel_start, subchannel_len, rx_power_dbm)` on a 5-subchannel grid.
pub type SigSpec = (u16, u16, f64);

pub fn signals(specs: &[SigSpec]) -> Vec<RxSignal> {
    specs
        .iter()
        .enumerate()
        .map(|(i, &(s, l, p))| RxSignal::new(i as u32 + 1, Csr::new(0, s, l), p))
        .collect()
}

fn sinr(specs: &[SigSpec], noise_lin: f64, c: SinrCombining) -> Vec<LinkQuality> {
    let mut q = Vec::new();
    phy::batch_sinr(&signals(specs), noise_lin, c, &mut q);
    q
}

fn same_db(a: f64, b: f64, tol: f64) -> bool {
    (a.is_infinite() && a == b) || (a - b).abs() <= tol
}

/// Shifting every power by `k_db` with zero noise leaves every SINR as is.
pub fn scale_invariance(specs: &[SigSpec], k_db: f64, c: SinrCombining) -> Result<(), String> {
    let base = sinr(specs, 0.0, c);
    let shifted: Vec<SigSpec> = specs.iter().map(|&(s, l, p)| (s, l, p + k_db)).collect();
    let moved = sinr(&shifted, 0.0, c);
    for (i, (a, b)) in base.iter().zip(&moved).enumerate() {
        if !same_db(a.sinr_db, b.sinr_db, 1e-9) {
            return Err(format!("signal {i}: {} dB became {} dB after +{k_db} dB", a.sinr_db, b.sinr_db));
        }
    }
    Ok(())
}

/// Dropping signal `drop` never lowers the SINR of any other signal.
pub fn interference_monotone(specs: &[SigSpec], drop: usize, noise_lin: f64, c: SinrCombining) -> Result<(), String> {
    let full = sinr(specs, noise_lin, c);
    let mut fewer = specs.to_vec();
    fewer.remove(drop);
    let reduced = sinr(&fewer, noise_lin, c);
    let kept = (0..specs.len()).filter(|&i| i != drop);
    for (i, q) in kept.zip(&reduced) {
        if q.sinr_db < full[i].sinr_db - 1e-9 {
            return Err(format!(
                "removing signal {drop} lowered signal {i} from {} to {} dB",
                full[i].sinr_db, q.sinr_db
            ));
        }
    }
    Ok(())
}

/// RSRP is power per occupied subchannel; RSSI is everything on the
/// packet's subchannels, noise included; min combining never beats mean.
pub fn measurement_definitions(specs: &[SigSpec], noise_lin: f64) -> Result<(), String> {
    let mean = sinr(specs, noise_lin, SinrCombining::LinearMean);
    let min = sinr(specs, noise_lin, SinrCombining::Min);
    for (i, &(s, l, p)) in specs.iter().enumerate() {
        let psd = |x: &SigSpec| 10f64.powf(x.2 / 10.0) / x.1 as f64;
        let rsrp = 10.0 * (10f64.powf(p / 10.0) / l as f64).log10();
        let mut total = 0.0;
        for c in s..s + l {
            total += noise_lin;
            for o in specs.iter().filter(|o| o.0 <= c && c < o.0 + o.1) {
                total += psd(o);
            }
        }
        let rssi = 10.0 * total.log10();
        if (mean[i].rsrp_dbm - rsrp).abs() > 1e-9 {
            return Err(format!("signal {i}: rsrp {} != {rsrp}", mean[i].rsrp_dbm));
        }
        if (mean[i].rssi_dbm - rssi).abs() > 1e-9 {
            return Err(format!("signal {i}: rssi {} != {rssi}", mean[i].rssi_dbm));
        }
        if min[i].sinr_db > mean[i].sinr_db + 1e-9 {
            return Err(format!("signal {i}: min {} > mean {}", min[i].sinr_db, mean[i].sinr_db));
        }
    }
    Ok(())
}

/// Clamping outside the table, exact values on the knots, straight lines
/// between them and monotonicity over `queries`.
pub fn bler_lookup(table: &BlerTable, queries: &[f64]) -> Result<(), String> {
    let pts = &table.points;
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    let expect = |x: f64| -> f64 {
        if x < first.0 {
            return 1.0;
        }
        if x > last.0 {
            return 0.0;
        }
        for w in pts.windows(2) {
            if x >= w[0].0 && x <= w[1].0 {
                if x == w[0].0 {
                    return w[0].1;
                }
                if x == w[1].0 {
                    return w[1].1;
                }
                return w[0].1 + (w[1].1 - w[0].1) * (x - w[0].0) / (w[1].0 - w[0].0);
            }
        }
        last.1
    };
    for &(s, b) in pts {
        if phy::bler(table, s) != b {
            return Err(format!("knot {s}: {} != {b}", phy::bler(table, s)));
        }
    }
    let mut qs = queries.to_vec();
    qs.sort_by(f64::total_cmp);
    let mut prev = 1.0;
    for x in qs {
        let got = phy::bler(table, x);
        if (got - expect(x)).abs() > 1e-12 {
            return Err(format!("bler({x}) = {got}, expected {}", expect(x)));
        }
        if got > prev {
            return Err(format!("bler increased to {got} at {x}"));
        }
        prev = got;
    }
    if phy::bler(table, first.0 - 1.0) != 1.0 || phy::bler(table, last.0 + 1.0) != 0.0 {
        return Err("clamp outside the table".into());
    }
    Ok(())
}

/// Builds a valid table from raw increments.
pub fn table_from(steps: &[(f64, f64)]) -> BlerTable {
    let mut s = -5.0;
    let mut b = 1.0;
    let mut points = Vec::new();
    for &(ds, db) in steps {
        s += ds;
        b = (b - db).max(0.0);
        points.push((s, b));
    }
    BlerTable::new(5, points).unwrap()
}
