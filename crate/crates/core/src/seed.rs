//! Stable seed derivation.
//!
//! Every random choice in the pipeline draws from a stream keyed by the base
//! seed plus the identity of the thing being decided (document, sentence,
//! fold, run...). Work can therefore run in any order, or in parallel, and
//! still produce the same result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Builder for a derived seed. Hashing is FNV-1a followed by a splitmix64
/// finaliser, so values are stable across platforms and compiler versions.
#[derive(Debug, Clone, Copy)]
pub struct SeedKey(u64);

impl SeedKey {
    pub fn new(base: u64) -> Self {
        let mut key = SeedKey(FNV_OFFSET);
        key.absorb(&base.to_le_bytes());
        key
    }

    fn absorb(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn str(mut self, s: &str) -> Self {
        // length prefix keeps ("ab","c") and ("a","bc") apart
        self.absorb(&(s.len() as u64).to_le_bytes());
        self.absorb(s.as_bytes());
        self
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.absorb(&v.to_le_bytes());
        self
    }

    pub fn finish(self) -> u64 {
        splitmix64(self.0)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.finish())
    }

    /// Maps the key to a float in `[0, 1)` using the top 53 bits.
    pub fn unit(self) -> f64 {
        (self.finish() >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
