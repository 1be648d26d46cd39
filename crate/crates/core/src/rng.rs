//! Seeded random streams.
//!
//! Every stochastic entry point takes a `u64` seed and derives its generators
//! from it with [`stream`] and [`child_seed`]:
//!
//! * `stream(seed, s)` is ChaCha8 keyed by `seed` with stream id `s`. ChaCha is
//!   counter based, so streams with distinct ids never overlap and the output
//!   is identical across platforms.
//! * `child_seed(seed, tag)` derives an independent 64-bit seed for a nested
//!   task (replicate `r`, candidate `K`, ...) by SplitMix64-mixing the pair.
//!
//! Chain `c` of a fit seeded with `s` uses `stream(s, c)`; replicate `r` of a
//! study seeded with `s` uses `child_seed(s, r)` as its own seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Tags for [`child_seed`] that keep the sub-tasks of one fit apart.
pub mod tags {
    pub const GENERATE: u64 = 0x67656e;
    pub const PRIOR: u64 = 0x7072696f72;
    pub const CHAINS: u64 = 0x636861696e;
    pub const BASELINE: u64 = 0x62617365;
}

pub fn stream(seed: u64, stream_id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

pub fn child_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
