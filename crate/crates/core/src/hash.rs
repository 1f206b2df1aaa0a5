//! Deterministic input fingerprints for keyed pseudorandom membership.

use crate::linalg::{FpMatrix, FpVector};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Streaming fingerprint over words, stable across platforms and releases.
#[derive(Debug, Clone, Copy)]
pub struct Fingerprint(u64);

impl Fingerprint {
    pub fn new(seed: u64) -> Self {
        Self(mix(seed ^ GOLDEN))
    }

    #[inline]
    pub fn push(&mut self, word: u64) {
        self.0 = mix(self.0.wrapping_add(GOLDEN) ^ word);
    }

    pub fn push_matrix(&mut self, m: &FpMatrix) {
        self.push(m.rows() as u64);
        self.push(m.cols() as u64);
        for &x in m.raw() {
            self.push(x as u64);
        }
    }

    pub fn push_vector(&mut self, v: &FpVector) {
        self.push(v.len() as u64);
        for &x in v.raw() {
            self.push(x as u64);
        }
    }

    pub fn finish(&self) -> u64 {
        mix(self.0)
    }

    /// The fingerprint mapped to `[0, 1)`.
    pub fn unit(&self) -> f64 {
        (self.finish() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Keyed hash of a word slice mapped to `[0, 1)`.
pub fn unit_hash(seed: u64, words: &[u64]) -> f64 {
    let mut fp = Fingerprint::new(seed);
    for &w in words {
        fp.push(w);
    }
    fp.unit()
}
