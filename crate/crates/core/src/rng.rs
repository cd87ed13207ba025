//! Seeded randomness.
//!
//! All randomized steps draw from ChaCha8 seeded through
//! `SeedableRng::seed_from_u64`, whose output stream is fixed across
//! platforms. Work that needs an independent stream takes a child generator
//! from [`Rng::child`], which seeds a fresh ChaCha8 from the parent's next
//! 64-bit draw; streams are never shared between workers.

use rand::seq::{index, SliceRandom};
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Splits off an independent generator, advancing this one by one draw.
    pub fn child(&mut self) -> Rng {
        Rng::from_seed(self.0.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.0);
    }

    /// `amount` distinct indices from `0..length`, sorted ascending.
    pub fn sample_indices(&mut self, length: usize, amount: usize) -> Vec<usize> {
        let amount = amount.min(length);
        let mut picked = index::sample(&mut self.0, length, amount).into_vec();
        picked.sort_unstable();
        picked
    }
}
