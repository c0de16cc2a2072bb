//! Text embedding contract and the deterministic default embedder.
//!
//! Any deterministic `text -> UnitVector` function with a fixed dimension
//! satisfies the contract; the default hashes lowercased alphanumeric tokens
//! into a fixed number of buckets and L2-normalizes the counts. Similar
//! wording therefore yields higher cosine similarity without any external
//! model weights.

use serde::{Deserialize, Serialize};

use super::SemGenError;

/// An L2-normalized embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitVector {
    components: Vec<f64>,
}

/// Tolerance on the unit-norm invariant.
pub const NORM_TOLERANCE: f64 = 1e-9;

impl UnitVector {
    /// Wrap an already-normalized vector, checking the invariants.
    pub fn new(components: Vec<f64>) -> Result<Self, SemGenError> {
        if components.is_empty() {
            return Err(SemGenError::DimMismatch {
                expected: 1,
                actual: 0,
            });
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(SemGenError::NonFiniteComponent);
        }
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(SemGenError::NotUnitNorm(norm));
        }
        Ok(Self { components })
    }

    /// Normalize a raw vector. Fails on zero or non-finite input.
    pub fn normalize(raw: Vec<f64>) -> Result<Self, SemGenError> {
        if raw.iter().any(|c| !c.is_finite()) {
            return Err(SemGenError::NonFiniteComponent);
        }
        let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SemGenError::NotUnitNorm(norm));
        }
        let components = raw.into_iter().map(|c| c / norm).collect();
        Self::new(components)
    }

    pub fn dims(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// Dot product; for unit vectors this is the cosine similarity.
    pub fn dot(&self, other: &UnitVector) -> Result<f64, SemGenError> {
        if self.dims() != other.dims() {
            return Err(SemGenError::DimMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a * b)
            .sum())
    }
}

/// Deterministic text encoder producing fixed-dimension unit vectors.
pub trait Embedder {
    fn dims(&self) -> usize;

    /// Embed non-empty text; identical input gives identical output.
    fn embed(&self, text: &str) -> Result<UnitVector, SemGenError>;
}

/// Published hash seed for the default embedder. Changing it changes every
/// embedding, so it is part of the on-disk compatibility contract.
pub const DEFAULT_EMBED_SEED: u64 = 0x6e65_7473_656d_2e31; // "netsem.1"

/// Default embedder dimension.
pub const DEFAULT_EMBED_DIMS: usize = 256;

/// Token-count hashing embedder: lowercase, split on non-alphanumerics, hash
/// each token into a bucket, count, L2-normalize.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dims: usize,
    seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self {
            dims: DEFAULT_EMBED_DIMS,
            seed: DEFAULT_EMBED_SEED,
        }
    }
}

impl HashEmbedder {
    pub fn new(dims: usize, seed: u64) -> Self {
        assert!(dims > 0, "embedder dimension must be positive");
        Self { dims, seed }
    }
}

impl Embedder for HashEmbedder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn embed(&self, text: &str) -> Result<UnitVector, SemGenError> {
        if text.is_empty() {
            return Err(SemGenError::EmptyText);
        }
        let mut counts = vec![0.0_f64; self.dims];
        let lower = text.to_lowercase();
        let mut any = false;
        for token in lower.split(|c: char| !c.is_alphanumeric()) {
            if token.is_empty() {
                continue;
            }
            any = true;
            let bucket = (fnv1a64(token.as_bytes(), self.seed) % self.dims as u64) as usize;
            counts[bucket] += 1.0;
        }
        if !any {
            // No alphanumeric tokens at all: hash the raw text as one token
            // so every non-empty input still embeds deterministically.
            let bucket = (fnv1a64(lower.as_bytes(), self.seed) % self.dims as u64) as usize;
            counts[bucket] = 1.0;
        }
        UnitVector::normalize(counts)
    }
}

/// FNV-1a 64-bit, offset basis mixed with the configured seed. Stable across
/// platforms and releases.
pub fn fnv1a64(bytes: &[u8], seed: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET ^ seed;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}
