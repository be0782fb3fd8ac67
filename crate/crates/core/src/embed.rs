//! Deterministic text embeddings: signed hashed bag-of-words. Each
//! whitespace token is hashed (FNV-1a 64) to a bucket with a hash-derived
//! sign, accumulated, then L2-normalized. Deterministic across platforms,
//! order-insensitive, and cheap. An optional remote embedding model can sit
//! behind the same vector interface without changing callers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EMBEDDING_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Embed text as a signed hashed bag of words; the zero vector for empty
/// text, unit L2 norm otherwise.
pub fn embed_text(text: &str, dim: usize) -> Embedding {
    assert!(dim >= 1, "embedding dimension must be >= 1");
    let mut values = vec![0.0f64; dim];
    for token in text.split_whitespace() {
        let hash = fnv1a64(token.as_bytes());
        let bucket = (hash % dim as u64) as usize;
        let sign = if (hash >> 63) == 0 { 1.0 } else { -1.0 };
        values[bucket] += sign;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    Embedding { values }
}

/// Standard cosine similarity in [-1, 1]; zero vectors compare as 0.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let norm_a = a.norm();
    let norm_b = b.norm();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x * y)
        .sum();
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}
