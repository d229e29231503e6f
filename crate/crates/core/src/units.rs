//! dB / linear conversions. Powers are milliwatts in the linear domain.

#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * libm::log10(lin)
}

/// Resource block width in Hz.
pub const RB_HZ: f64 = 180_000.0;

/// Thermal noise density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;
