//! Deterministic text embedding by feature hashing.
//!
//! Each whitespace token is hashed to one of `d` buckets with FNV-1a and
//! signed by a second hash; the accumulated row is L2-normalized. The
//! embedder is frozen: it has no trainable state and the same text always
//! maps to the same row, on every platform.

use ndarray::{Array1, Array2};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const INDEX_SEED: u64 = 0;
const SIGN_SEED: u64 = 0x5bd1_e995;

fn fnv1a64(bytes: &[u8], seed: u64) -> u64 {
    let mut hash = FNV_OFFSET ^ seed;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Source of fixed-dimension text embeddings.
pub trait TextEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Array1<f64>;
}

/// The default hashing embedder.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl TextEmbedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    /// Empty text embeds to the zero row.
    fn embed(&self, text: &str) -> Array1<f64> {
        let mut row = Array1::zeros(self.dim);
        for token in text.split_whitespace() {
            let bytes = token.as_bytes();
            let idx = (fnv1a64(bytes, INDEX_SEED) % self.dim as u64) as usize;
            let sign = if fnv1a64(bytes, SIGN_SEED) & 1 == 0 {
                1.0
            } else {
                -1.0
            };
            row[idx] += sign;
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
        row
    }
}

/// Embed a batch of texts, one row per text.
pub fn embed_texts(texts: &[String], provider: &dyn TextEmbedder) -> Array2<f64> {
    let mut out = Array2::zeros((texts.len(), provider.dim()));
    for (i, text) in texts.iter().enumerate() {
        out.row_mut(i).assign(&provider.embed(text));
    }
    out
}
