//! Seeded, hierarchically derived random streams.
//!
//! Every random draw in a run comes from a [`SeedStream`] derived from the run
//! seed by a path of labels, e.g. `run / "lloyds" / round 2 / "sums"`. Streams
//! on distinct paths are independent, so clients and mechanisms can be
//! simulated in any order (or in parallel) and still replay bit-for-bit.
//! The generator behind each stream is ChaCha20, a counter-based cipher RNG.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    key: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// FNV-1a; std's hasher is not stable across releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { key: splitmix64(seed) }
    }

    /// Substream named by `label`.
    pub fn child(&self, label: &str) -> Self {
        Self { key: splitmix64(self.key ^ splitmix64(fnv1a(label.as_bytes()))) }
    }

    /// Substream for the `i`-th item of an indexed family (round, client, restart).
    pub fn index(&self, i: u64) -> Self {
        Self { key: splitmix64(self.key.rotate_left(17) ^ splitmix64(i ^ 0xA5A5_5A5A_C3C3_3C3C)) }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.key)
    }

    pub fn key(&self) -> u64 {
        self.key
    }
}
