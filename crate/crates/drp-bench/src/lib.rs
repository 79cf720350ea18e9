//! Shared input generators for the benchmarks.

use drp_core::cluster::SplitMix64;
use drp_core::embed::{EmbeddingVector, UserProfileEmbedding};
use drp_core::metrics::TokenSequence;

const VOCAB: &[&str] = &[
    "the",
    "record",
    "story",
    "warm",
    "pressing",
    "detective",
    "prose",
    "mystery",
    "twist",
    "narrative",
    "great",
    "quiet",
    "detail",
    "sound",
    "character",
    "plot",
    "imagery",
    "turntable",
    "review",
    "reads",
    "slow",
    "fast",
    "tone",
    "ending",
    "chapter",
];

/// Review-like token sequence of the given length.
pub fn token_sequence(rng: &mut SplitMix64, len: usize) -> TokenSequence {
    TokenSequence(
        (0..len)
            .map(|_| VOCAB[rng.next_range(VOCAB.len())].to_string())
            .collect(),
    )
}

/// Paired hypothesis/reference sequences with realistic overlap.
pub fn review_pairs(count: usize, len: usize, seed: u64) -> Vec<(TokenSequence, TokenSequence)> {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|_| {
            let reference = token_sequence(&mut rng, len);
            let mut hypothesis = reference.clone();
            for _ in 0..len / 4 {
                let index = rng.next_range(len);
                hypothesis.0[index] = VOCAB[rng.next_range(VOCAB.len())].to_string();
            }
            (hypothesis, reference)
        })
        .collect()
}

/// Random user profile points for clustering benchmarks.
pub fn profile_points(count: usize, dim: usize, seed: u64) -> Vec<UserProfileEmbedding> {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|i| UserProfileEmbedding {
            user_id: format!("user{i:04}"),
            vector: EmbeddingVector {
                values: (0..dim).map(|_| rng.next_f64() * 2.0 - 1.0).collect(),
            },
        })
        .collect()
}
