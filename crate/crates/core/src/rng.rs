//! Random number plumbing.
//!
//! All generators draw uniform variates on the open interval (0, 1) through
//! [`UniformSource`]. Seeded runs use ChaCha8 (`rand_chacha::ChaCha8Rng`)
//! initialised with `seed_from_u64`; per-epoch and per-realisation streams
//! are derived by selecting ChaCha stream number `index` on a generator
//! seeded with the master seed, so any ChaCha8 implementation can replay
//! them.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01};

/// A source of uniform variates on (0, 1).
pub trait UniformSource {
    fn next_open01(&mut self) -> f64;
}

impl<R: RngCore> UniformSource for R {
    fn next_open01(&mut self) -> f64 {
        Open01.sample(self)
    }
}

/// Replays a fixed cycle of values. Used to inject hand-chosen variates.
#[derive(Debug, Clone)]
pub struct CycleSource {
    values: Vec<f64>,
    pos: usize,
}

impl CycleSource {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "cycle source needs at least one value");
        Self { values, pos: 0 }
    }
}

impl UniformSource for CycleSource {
    fn next_open01(&mut self) -> f64 {
        let v = self.values[self.pos];
        self.pos = (self.pos + 1) % self.values.len();
        v
    }
}

/// Generator for a master seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for sub-stream `index` of `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A 64-bit seed for realisation `index` of `seed`, for APIs that take a
/// plain seed rather than a generator.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    substream(seed, index).next_u64()
}

/// Round half away from zero.
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}
