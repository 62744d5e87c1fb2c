//! Addressable random streams.
//!
//! Every stochastic operation takes an explicit [`RngStream`]. A stream is a
//! `(seed, stream_id)` pair mapped onto ChaCha8 with `set_stream`, so the same
//! pair reproduces the same draws on every run and platform. Child streams are
//! derived by index, which lets parallel work items own their randomness
//! independently of scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Root stream of a master seed.
    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Child stream `index` of this stream. Children of distinct parents, and
    /// distinct children of one parent, map to distinct ChaCha keys/streams.
    pub fn derive(&self, index: u64) -> Self {
        let key = mix64(self.seed ^ mix64(self.stream_id.wrapping_add(0xA076_1D64_78BD_642F)));
        Self::new(key, index)
    }

    /// Child stream addressed by a path of indices.
    pub fn derive_path(&self, path: &[u64]) -> Self {
        path.iter().fold(*self, |s, &i| s.derive(i))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
