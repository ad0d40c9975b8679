//! Seeded, splittable random streams. Every stochastic operation takes an
//! explicit stream; there is no global generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// The root stream for a run seed.
pub fn root(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An independent sub-stream of `seed` identified by `stream`. Distinct
/// stream ids never overlap.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
