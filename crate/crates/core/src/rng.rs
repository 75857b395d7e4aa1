//! Seeded random streams.
//!
//! Every stochastic component takes an explicit generator. Independent streams are
//! derived from a master seed and an index so that work split across threads draws
//! the same numbers regardless of scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// A generator seeded from a single integer.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` of the family rooted at `master`.
pub fn stream(master: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Draws a fresh seed for a child generator.
pub fn child(rng: &mut Rng) -> Rng {
    seeded(rng.next_u64())
}
