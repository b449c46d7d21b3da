//! Baseline similarity between unrelated images.

use plc_core::metrics::{cosine_similarity, EmbeddingVector, MetricsError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `count` ordered index pairs (i, j), i ≠ j, drawn uniformly from
/// `0..n` with a seeded ChaCha8 stream. Empty when `n < 2`.
pub fn unrelated_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            (i, j)
        })
        .collect()
}

/// Mean cosine over the given pairs; `None` for no pairs.
pub fn mean_pair_similarity(
    embeddings: &[EmbeddingVector],
    pairs: &[(usize, usize)],
) -> Result<Option<f64>, MetricsError> {
    if pairs.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for &(i, j) in pairs {
        total += cosine_similarity(&embeddings[i], &embeddings[j])?;
    }
    Ok(Some(total / pairs.len() as f64))
}
