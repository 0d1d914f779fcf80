//! Deterministic RNG streams.
//!
//! Every consumer of randomness (a client in a given round, the generator,
//! the partitioner, ...) gets its own `ChaCha8Rng` whose seed is a mix of the
//! experiment seed and a list of tags. Streams never depend on the order in
//! which other streams were consumed, so serial and parallel execution see
//! identical draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG type used for every stream in the simulator.
pub type RngStream = ChaCha8Rng;

/// Stream tags. Kept distinct so streams for different roles never collide.
pub mod tag {
    pub const DATASET: u64 = 0x6461_7461;
    pub const PARTITION: u64 = 0x7061_7274;
    pub const INIT: u64 = 0x696e_6974;
    pub const SAMPLE: u64 = 0x7361_6d70;
    pub const GENERATE: u64 = 0x6765_6e65;
    pub const CLIENT: u64 = 0x636c_6e74;
    pub const AUGMENT: u64 = 0x6175_676d;
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into a single 64-bit seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Opens the stream identified by `parts`.
pub fn stream(parts: &[u64]) -> RngStream {
    ChaCha8Rng::seed_from_u64(mix_seed(parts))
}
