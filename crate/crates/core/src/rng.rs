//! Seeded random streams.
//!
//! Every random decision in a run comes from a `ChaCha8Rng` so that a run is
//! fully determined by its seed on any platform. Independent concerns use
//! separate ChaCha streams of the same seed, which keeps e.g. pseudo-negative
//! sampling identical between strategies that do and do not draw arm samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SearchRng = ChaCha8Rng;

/// Stream used for pseudo-negative resampling.
pub const STREAM_TRAINING: u64 = 1;
/// Stream used for arm samples and the random baseline.
pub const STREAM_SELECTION: u64 = 2;
/// Stream used to draw seed sets.
pub const STREAM_SEEDS: u64 = 3;

pub fn stream(seed: u64, stream: u64) -> SearchRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser. Used to derive per-run seeds from a master seed:
/// run `r` uses `split_seed(master, r)`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
