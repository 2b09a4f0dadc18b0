//! Counter-addressed random streams.
//!
//! Every random draw in a scan is addressed by `(seed, point index, channel)`.
//! The stream for a key is a ChaCha8 keystream: the seed selects the key, the
//! point index selects the 64-bit stream id, and the channel selects a block of
//! word positions inside that stream. Draws therefore do not depend on the
//! order in which points are evaluated.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Word positions reserved for each channel within one point's stream.
const WORDS_PER_CHANNEL: u128 = 1 << 32;

#[derive(Debug, Clone)]
pub struct CounterRng {
    inner: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64, point: u64, channel: u32) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(point);
        inner.set_word_pos(u128::from(channel) * WORDS_PER_CHANNEL);
        CounterRng { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn normal(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            0.0
        } else {
            sigma * self.standard_normal()
        }
    }
}
