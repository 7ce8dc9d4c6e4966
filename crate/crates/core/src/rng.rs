//! Reproducible random streams.
//!
//! Every stochastic task (a chain, a replication, a bootstrap resample) gets
//! its own ChaCha8 stream: the 64-bit seed selects the key and the task index
//! selects the stream, so results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream `index` of the generator keyed by `seed`.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed for a nested task family, e.g. the bootstrap of one
/// study replication.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    substream(seed ^ 0x9e37_79b9_7f4a_7c15, index).next_u64()
}
