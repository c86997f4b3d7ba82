//! Small deterministic RNG helpers.
//!
//! Everything in this crate that needs randomness (graph generation, fuzzed
//! initial states, per-round coin flips) derives it from explicit 64-bit
//! seeds through these functions, so runs and reports are reproducible
//! byte for byte across platforms.

/// splitmix64 finalizer. Good avalanche, cheap, and stateless.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Hashes several seed words into one stream key.
pub fn mix_parts(parts: &[u64]) -> u64 {
    let mut acc = 0x243f6a8885a308d3u64;
    for &p in parts {
        acc = mix64(acc ^ p);
    }
    acc
}

/// Sequential splitmix64 stream.
#[derive(Debug, Clone)]
pub struct SimRng {
    state: u64,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng { state: mix64(seed) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform draw from `[0, bound)`.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // Multiply-shift keeps the tiny modulo bias away from small bounds.
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    pub fn bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }

    /// Bernoulli draw with probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) < p
    }
}
