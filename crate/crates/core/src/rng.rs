//! Deterministic randomness.
//!
//! Two flavours: sequential per-vehicle ChaCha streams for scheduler
//! decisions, and counter-based keyed draws for link quantities so a
//! shadowing or decode draw depends only on `(seed, tx, rx, subframe)` and
//! never on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type VehicleRng = ChaCha8Rng;

/// Purpose tags keep keyed streams for different quantities independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Shadowing = 0x5348_4144,
    Decode = 0x4445_434f,
    Vehicle = 0x5645_4849,
    Phase = 0x5048_4153,
    Placement = 0x504c_4143,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed, a stream tag and up to three keys into 64 random bits.
#[inline]
pub fn keyed_u64(seed: u64, stream: Stream, a: u64, b: u64, c: u64) -> u64 {
    let mut h = splitmix(seed ^ (stream as u64).rotate_left(32));
    h = splitmix(h ^ a);
    h = splitmix(h ^ b.rotate_left(21));
    splitmix(h ^ c.rotate_left(42))
}

/// Uniform in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn keyed_unit(seed: u64, stream: Stream, a: u64, b: u64, c: u64) -> f64 {
    to_unit(keyed_u64(seed, stream, a, b, c))
}

/// Standard normal deviate via Box-Muller on two keyed uniforms.
#[inline]
pub fn keyed_normal(seed: u64, stream: Stream, a: u64, b: u64, c: u64) -> f64 {
    let bits = keyed_u64(seed, stream, a, b, c);
    let u1 = 1.0 - to_unit(bits); // (0, 1]
    let u2 = to_unit(splitmix(bits));
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

pub fn vehicle_rng(seed: u64, vehicle_id: u32) -> VehicleRng {
    ChaCha8Rng::seed_from_u64(keyed_u64(seed, Stream::Vehicle, vehicle_id as u64, 0, 0))
}

pub fn stream_rng(seed: u64, stream: Stream) -> VehicleRng {
    ChaCha8Rng::seed_from_u64(keyed_u64(seed, stream, 0, 0, 0))
}
