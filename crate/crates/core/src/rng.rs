//! Counter-based random substreams.
//!
//! Every draw in the filter comes from a stream keyed by
//! `(seed, step, particle, purpose)`, so results do not depend on the order
//! in which particles are processed or on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Prior = 1,
    Resample = 2,
    StateNoise = 3,
    DriftJitter = 4,
    ThetaNoise = 5,
    Observation = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for one `(step, particle, purpose)` cell.
pub fn substream(seed: u64, step: u64, particle: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ step);
    h = splitmix64(h ^ particle);
    h = splitmix64(h ^ purpose as u64);
    ChaCha8Rng::seed_from_u64(h)
}
