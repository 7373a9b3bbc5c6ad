//! Seeded random streams. Every stochastic stage draws from a ChaCha stream
//! derived from one master seed and a stage-specific stream id.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
