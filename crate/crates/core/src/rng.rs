//! Counter-based deterministic random stream.
//!
//! A stream is identified by a key derived from SHA-256 over a tagged,
//! length-prefixed encoding of its identifying parts. Draw `i` is the
//! SplitMix64 finalizer applied to `key + (i + 1) * GOLDEN`, so any draw can
//! be computed without touching the others and two streams never share
//! state. Gaussians come from Box–Muller with the `libm` transcendental
//! functions, which keeps the bit patterns identical across platforms.

use sha2::{Digest, Sha256};

use crate::embedding::FaceEmbedding;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Builder for stream keys.
#[derive(Clone)]
pub struct StreamKey {
    hasher: Sha256,
}

impl StreamKey {
    pub fn new(domain: &str) -> Self {
        let mut key = StreamKey {
            hasher: Sha256::new(),
        };
        key = key.str(domain);
        key
    }

    pub fn u64(mut self, value: u64) -> Self {
        self.hasher.update([0x01]);
        self.hasher.update(value.to_le_bytes());
        self
    }

    pub fn str(mut self, value: &str) -> Self {
        self.hasher.update([0x02]);
        self.hasher.update((value.len() as u64).to_le_bytes());
        self.hasher.update(value.as_bytes());
        self
    }

    pub fn stream(self) -> KeyedStream {
        let digest = self.hasher.finalize();
        let mut first = [0u8; 8];
        first.copy_from_slice(&digest[..8]);
        KeyedStream::from_key(u64::from_le_bytes(first))
    }
}

/// Random stream positioned at a counter. Cloning forks the position.
#[derive(Debug, Clone)]
pub struct KeyedStream {
    key: u64,
    counter: u64,
    spare_gaussian: Option<f64>,
}

impl KeyedStream {
    pub fn from_key(key: u64) -> Self {
        KeyedStream {
            key,
            counter: 0,
            spare_gaussian: None,
        }
    }

    /// The raw draw at position `index`, independent of the cursor.
    pub fn at(&self, index: u64) -> u64 {
        mix(self
            .key
            .wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.at(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in `(0, 1]`.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (`n > 0`).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        // Lemire's multiply-shift; the bias is below 2^-64 * n.
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.below(hi - lo + 1)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_open01() <= p
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_gaussian.take() {
            return z;
        }
        let u1 = self.next_open01();
        let u2 = self.next_open01();
        let radius = (-2.0 * libm::log(u1)).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_gaussian = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    pub fn gaussian_vector(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.standard_normal()).collect()
    }

    /// A uniformly distributed point on the unit sphere.
    pub fn unit_vector(&mut self, dim: usize) -> FaceEmbedding {
        loop {
            let v = self.gaussian_vector(dim);
            if let Ok(e) = FaceEmbedding::normalize(v) {
                return e;
            }
        }
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `normalize(canonical + sigma * g)` with `g` drawn from `stream`.
/// With `sigma == 0` the canonical embedding is returned unchanged.
pub fn synth_embedding(
    canonical: &FaceEmbedding,
    sigma: f64,
    stream: &mut KeyedStream,
) -> FaceEmbedding {
    if sigma == 0.0 {
        return canonical.clone();
    }
    loop {
        let noisy: Vec<f64> = canonical
            .values()
            .iter()
            .map(|c| c + sigma * stream.standard_normal())
            .collect();
        if let Ok(e) = FaceEmbedding::normalize(noisy) {
            return e;
        }
    }
}

/// Stream for the detection of `student_id` in block `block` of `session_id`.
pub fn detection_stream(
    seed: u64,
    session_id: &str,
    block: usize,
    student_id: &str,
) -> KeyedStream {
    StreamKey::new("attenface/detection")
        .u64(seed)
        .str(session_id)
        .u64(block as u64)
        .str(student_id)
        .stream()
}

/// Stream for an auto-generated canonical embedding.
pub fn canonical_stream(seed: u64, student_id: &str) -> KeyedStream {
    StreamKey::new("attenface/canonical")
        .u64(seed)
        .str(student_id)
        .stream()
}
