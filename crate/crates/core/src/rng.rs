//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by
//! `(seed, domain, index)`, so draws never depend on how many numbers some
//! other component consumed. This is what makes paired with/without-SBR runs
//! and variance sweeps use common random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Values are arbitrary but fixed forever.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    ObservationNoise = 0x6f62_7300,
    Imu = 0x696d_7500,
    Odometer = 0x6f64_6f00,
    InitialError = 0x696e_6900,
    Geometry = 0x6765_6f00,
}

/// Deterministic generator for one `(seed, domain, index)` triple.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let key = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(17) ^ domain as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
