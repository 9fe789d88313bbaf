//! Text embeddings and unit-vector normalization.
//!
//! [`HashEmbedder`] is the built-in reference provider: signed feature
//! hashing over term frequencies with FNV-1a 64, fully specified so that any
//! implementation produces the same vectors bit for bit. Real models plug in
//! through [`EmbeddingProvider`].

use thiserror::Error;

use crate::tokenize::tokenize;

/// Default embedding dimension.
pub const DEFAULT_DIMENSION: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("text has no tokens")]
    EmptyText,
    #[error("vector has no components")]
    EmptyVector,
    #[error("component {index} is not finite")]
    NonFinite { index: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding provider failed: {0}")]
    Provider(String),
}

/// A finite, fixed-dimension `f32` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::EmptyVector);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    /// Euclidean norm, accumulated in `f64`.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
    }

    /// Returns `self / ‖self‖`.
    pub fn normalize(&self) -> Result<Self, EmbedError> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(EmbedError::ZeroVector);
        }
        Ok(Self(self.0.iter().map(|&v| (f64::from(v) / norm) as f32).collect()))
    }

    /// Inner product accumulated in `f64`.
    pub fn dot(&self, other: &Self) -> Result<f64, EmbedError> {
        if self.dimension() != other.dimension() {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dimension(),
                got: other.dimension(),
            });
        }
        Ok(dot(&self.0, &other.0))
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Something that turns text into embeddings of a fixed dimension.
///
/// Implementations must be deterministic and shareable across request
/// handlers.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn name(&self) -> &str {
        "custom"
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |hash, &b| (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Signed feature-hashing term-frequency embedding, normalized.
///
/// Each token adds `±1` to bucket `fnv1a64(token) mod dimension`; the sign is
/// negative when the hash's most significant bit is set.
pub fn hash_embed(text: &str, dimension: usize) -> Result<EmbeddingVector, EmbedError> {
    assert!(dimension > 0, "embedding dimension must be positive");
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let mut buckets = vec![0.0f32; dimension];
    for token in &tokens {
        let h = fnv1a64(token.as_bytes());
        let bucket = (h % dimension as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        buckets[bucket] += sign;
    }
    // Every token cancelling out against a colliding token leaves nothing to
    // normalize.
    EmbeddingVector::new(buckets)?.normalize()
}

/// The reference [`EmbeddingProvider`] backed by [`hash_embed`].
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    /// # Panics
    /// When `dimension` is zero.
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION)
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        hash_embed(text, self.dimension)
    }

    fn name(&self) -> &str {
        "hash"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn padded(head: &[f32], d: usize) -> EmbeddingVector {
        let mut v = head.to_vec();
        v.resize(d, 0.0);
        EmbeddingVector::new(v).unwrap()
    }

    #[test]
    fn three_four_five() {
        let n = padded(&[3.0, 4.0, 0.0], 8).normalize().unwrap();
        assert!((n.as_slice()[0] - 0.6).abs() < 1e-7);
        assert!((n.as_slice()[1] - 0.8).abs() < 1e-7);
        assert!(n.as_slice()[2..].iter().all(|&v| v == 0.0));
        assert!((n.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unit_vector_is_fixed_point() {
        let u = padded(&[0.0, 1.0], 4);
        assert_eq!(u.normalize().unwrap(), u);
    }

    #[test]
    fn zero_vector_rejected() {
        assert_eq!(padded(&[], 16).normalize().unwrap_err(), EmbedError::ZeroVector);
    }

    #[test]
    fn non_finite_rejected() {
        assert_eq!(
            EmbeddingVector::new(vec![1.0, f32::NAN]).unwrap_err(),
            EmbedError::NonFinite { index: 1 }
        );
        assert_eq!(EmbeddingVector::new(vec![]).unwrap_err(), EmbedError::EmptyVector);
    }

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn hash_embed_is_deterministic() {
        let a = hash_embed("cat", 256).unwrap();
        let b = hash_embed("cat", 256).unwrap();
        assert_eq!(
            a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn repetition_does_not_change_direction() {
        assert_eq!(hash_embed("cat cat", 256).unwrap(), hash_embed("cat", 256).unwrap());
    }

    #[test]
    fn empty_text_rejected() {
        assert_eq!(hash_embed("", 16).unwrap_err(), EmbedError::EmptyText);
        assert_eq!(hash_embed(" ?! ", 16).unwrap_err(), EmbedError::EmptyText);
    }

    #[test]
    fn provider_reports_dimension() {
        let e = HashEmbedder::new(64);
        assert_eq!(e.embed("hello world").unwrap().dimension(), 64);
        assert_eq!(e.dimension(), 64);
    }
}
