//! Deterministic seed splitting.
//!
//! Every random stream is derived from one master seed. Stream `i` of a
//! master seed `s` is seeded with `splitmix64(s ^ splitmix64(i + 1))`, so a
//! replicate's draws depend only on `(s, i)` and never on which worker runs
//! it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sub-stream `stream` under `master`.
#[inline]
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(1)))
}

/// RNG for sub-stream `stream` under `master`.
pub fn stream_rng(master: u64, stream: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}

/// Named sub-streams used by the pipeline stages, so adding a stage never
/// shifts the randomness of another.
pub mod streams {
    pub const BOOTSTRAP_MEDIAN: u64 = 0x0100;
    pub const POSTERIOR_WEIGHT: u64 = 0x0200;
    pub const MIXTURE_RESTARTS: u64 = 0x0300;
    pub const SHAPIRO_SUBSAMPLE: u64 = 0x0400;
    pub const SIM_SPELLS: u64 = 0x0500;
    pub const SIM_SURVEY: u64 = 0x0600;
}
