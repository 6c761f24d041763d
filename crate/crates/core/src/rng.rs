use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic random stream keyed by `(seed, stream_index)`.
///
/// Replicate `r` of an experiment uses `stream_index = r`. Inside a replicate,
/// independent sub-streams (weights, latent draws, masks, noise) are obtained
/// with [`SeededRng::fork`].
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Independent child stream; depends only on `(seed, stream_index, tag)`,
    /// never on how much of the parent has been consumed.
    pub fn fork(&self, tag: u64) -> SeededRng {
        let child = splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x51_7c_c1_b7_27_22_0a_95)));
        SeededRng::new(child, self.stream_index)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Stream tags used by the experiment drivers.
pub mod tags {
    pub const WEIGHTS: u64 = 1;
    pub const LATENT: u64 = 2;
    pub const MASK: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const MISSING_PARAMS: u64 = 5;
    pub const TEST: u64 = 6;
    pub const PATTERNS: u64 = 7;
    pub const THETA: u64 = 8;
}
