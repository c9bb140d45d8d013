//! Seeded, forkable random streams.
//!
//! A stream is identified by a 64-bit key. Forking derives a child key from
//! the parent key and a label only, so a child's draws never depend on how
//! much of the parent has been consumed. Draws come from ChaCha8, which is
//! counter based and identical on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone)]
pub struct RandomStream {
    key: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(key: u64, bytes: &[u8]) -> u64 {
    let mut h = splitmix64(key ^ 0x6C62_272E_07BB_0142);
    for chunk in bytes.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        h = splitmix64(h ^ u64::from_le_bytes(word));
    }
    splitmix64(h ^ bytes.len() as u64)
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::from_key(splitmix64(seed))
    }

    fn from_key(key: u64) -> Self {
        Self {
            key,
            rng: ChaCha8Rng::seed_from_u64(key),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Child stream for a named purpose.
    pub fn fork(&self, label: &str) -> Self {
        Self::from_key(mix(self.key, label.as_bytes()))
    }

    /// Child stream for an indexed purpose (record index, trial, ...).
    pub fn fork_index(&self, index: u64) -> Self {
        let mut bytes = [0u8; 9];
        bytes[0] = 0xFF;
        bytes[1..].copy_from_slice(&index.to_le_bytes());
        Self::from_key(mix(self.key, &bytes))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw in `[lo, hi)`; returns `lo` when the interval is empty.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.rng.random_range(0..n as u64) as usize
    }

    pub fn coin(&mut self) -> bool {
        self.rng.random::<bool>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }
}
