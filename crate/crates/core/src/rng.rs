//! Path-derived random streams.
//!
//! A stream is keyed by `(master seed, sample id, plan entry, replicate)`.
//! The key is hashed with SHA-256 and the digest seeds a ChaCha8 generator,
//! so streams never share state and any output can be regenerated from its
//! key alone.
//!
//! Draw conventions (version 1):
//! - `uniform`: top 53 bits of a `u64` scaled by 2^-53, in `[0, 1)`.
//! - `below(n)`: Lemire multiply-and-reject, unbiased.
//! - `normal`: Box–Muller on `(1 - uniform, uniform)`; both variates of a
//!   pair are used, cosine branch first.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Names the generator, key hash and normal-variate convention.
pub const STREAM_VERSION: &str = "chacha8-sha256-boxmuller-v1";

/// Derivation path of a stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub sample_id: String,
    pub entry_index: u64,
    pub replicate_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, sample_id: impl Into<String>, entry_index: u64, replicate_index: u64) -> Self {
        Self {
            master_seed,
            sample_id: sample_id.into(),
            entry_index,
            replicate_index,
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"vessel-aug/stream/v1");
        h.update(self.master_seed.to_le_bytes());
        h.update((self.sample_id.len() as u64).to_le_bytes());
        h.update(self.sample_id.as_bytes());
        h.update(self.entry_index.to_le_bytes());
        h.update(self.replicate_index.to_le_bytes());
        let mut key = [0u8; 32];
        key.copy_from_slice(&h.finalize());
        key
    }

    /// Short hex fingerprint of the derived key, recorded in manifests.
    pub fn digest(&self) -> String {
        hex::encode(&self.key()[..8])
    }
}

pub fn derive_stream(spec: &SeedSpec) -> Stream {
    Stream::from_key(spec.key())
}

#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Stream {
    fn from_key(key: [u8; 32]) -> Self {
        Self {
            rng: ChaCha8Rng::from_seed(key),
            spare_normal: None,
        }
    }

    /// Stream for a seed previously drawn with [`Stream::sub_seed`].
    pub fn from_sub_seed(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"vessel-aug/sub/v1");
        h.update(seed.to_le_bytes());
        let mut key = [0u8; 32];
        key.copy_from_slice(&h.finalize());
        Self::from_key(key)
    }

    /// Draws a seed for an independent child stream.
    pub fn sub_seed(&mut self) -> u64 {
        self.next_u64()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the range is empty.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi, "empty integer range [{lo}, {hi}]");
        let span = (hi as i128 - lo as i128 + 1) as u128;
        if span > u128::from(u64::MAX) {
            return self.next_u64() as i64;
        }
        (lo as i128 + self.below(span as u64) as i128) as i64
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal variate (Box–Muller).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}
