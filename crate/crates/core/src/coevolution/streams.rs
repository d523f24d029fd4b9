//! Named random streams with draw accounting.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// ChaCha8 stream that counts the 32-bit words it hands out.
#[derive(Clone, Debug)]
pub struct CountingRng {
    inner: ChaCha8Rng,
    words: u64,
}

impl CountingRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner, words: 0 }
    }

    pub fn words(&self) -> u64 {
        self.words
    }
}

impl RngCore for CountingRng {
    fn next_u32(&mut self) -> u32 {
        self.words += 1;
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.words += 2;
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.words += dest.len().div_ceil(4) as u64;
        self.inner.fill_bytes(dest)
    }
}

/// Draw counters journaled with every evaluation request.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DrawCounts {
    pub variation: u64,
    pub partner_choice: u64,
    pub surrogate_init: u64,
    pub surrogate_shuffle: u64,
}

/// The engine's four streams, all derived from the master seed. Measurement
/// noise lives with the evaluator.
#[derive(Clone, Debug)]
pub struct Streams {
    pub variation: CountingRng,
    pub partner_choice: CountingRng,
    pub surrogate_init: CountingRng,
    pub surrogate_shuffle: CountingRng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self {
            variation: CountingRng::new(seed, 0),
            partner_choice: CountingRng::new(seed, 1),
            surrogate_init: CountingRng::new(seed, 2),
            surrogate_shuffle: CountingRng::new(seed, 3),
        }
    }

    pub fn counts(&self) -> DrawCounts {
        DrawCounts {
            variation: self.variation.words(),
            partner_choice: self.partner_choice.words(),
            surrogate_init: self.surrogate_init.words(),
            surrogate_shuffle: self.surrogate_shuffle.words(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent() {
        let mut s = Streams::new(5);
        let a: u64 = s.variation.random();
        let b: u64 = s.partner_choice.random();
        assert_ne!(a, b);
        let mut t = Streams::new(5);
        let _: u32 = t.partner_choice.random();
        assert_eq!(t.variation.random::<u64>(), a);
    }

    #[test]
    fn counts_words() {
        let mut r = CountingRng::new(1, 0);
        r.next_u32();
        r.next_u64();
        let mut buf = [0u8; 5];
        r.fill_bytes(&mut buf);
        assert_eq!(r.words(), 5);
    }
}
