//! Seeding policy.
//!
//! Every random stream in the crate is a ChaCha8 stream (`rand_chacha::ChaCha8Rng`).
//! The 256-bit key is expanded from a 64-bit seed with `SeedableRng::seed_from_u64`
//! and the 64-bit stream id selects one of 2^64 independent streams under that key.
//! Both steps are specified bit-for-bit by the `rand_core`/`rand_chacha` crates, so a
//! given `(seed, stream)` yields the same sequence on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for all simulation randomness.
pub type SimRng = ChaCha8Rng;

/// Stream `stream` under the key derived from `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The default stream for a single run seeded with `seed`.
pub fn seeded_rng(seed: u64) -> SimRng {
    stream_rng(seed, 0)
}
