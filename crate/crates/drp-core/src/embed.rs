//! Text embeddings and mean-pooled user profile embeddings.
//!
//! Two providers ship: a remote provider speaking the `/v1/embeddings`
//! wire protocol, and a deterministic seeded-hash provider (token n-gram
//! features hashed into `dim` buckets) so the whole test suite runs with
//! no network.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::UserHistory;
use crate::metrics::tokenize;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("text is empty")]
    EmptyText,
    #[error("history has no samples")]
    EmptyHistory,
    #[error("vector has zero norm, cannot normalize")]
    ZeroVector,
    #[error("expected dim {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedding provider: {0}")]
    Provider(String),
}

/// A fixed-dimension vector of finite reals. Serializes as a bare array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::Provider(
                "non-finite embedding component".into(),
            ));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// L2-normalize; zero vectors are an error, not a silent fallback.
    pub fn normalized(&self) -> Result<EmbeddingVector, EmbedError> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(EmbedError::ZeroVector);
        }
        Ok(EmbeddingVector {
            values: self.values.iter().map(|v| v / norm).collect(),
        })
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn squared_distance(&self, other: &EmbeddingVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Cosine similarity; 0 when either side has zero norm or when the
    /// norms overflow (keeps downstream score ordering total).
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 || !denom.is_finite() {
            return 0.0;
        }
        let value = self.dot(other) / denom;
        if value.is_finite() {
            value
        } else {
            0.0
        }
    }
}

/// A user's L2-normalized profile point, the input to clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfileEmbedding {
    pub user_id: String,
    pub vector: EmbeddingVector,
}

/// Batch-capable embedding backend.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

/// Embed one text.
pub fn embed_text(
    text: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingVector, EmbedError> {
    if text.trim().is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let mut vectors = provider.embed_batch(&[text])?;
    let vector = vectors
        .pop()
        .ok_or_else(|| EmbedError::Provider("empty batch response".into()))?;
    if vector.dim() != provider.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: provider.dim(),
            actual: vector.dim(),
        });
    }
    Ok(vector)
}

/// L2-normalized arithmetic mean of the per-review embeddings.
///
/// Reviews are embedded and summed in text-sorted order so the result is
/// exactly invariant to any reordering of the history.
pub fn profile_embedding(
    history: &UserHistory,
    provider: &dyn EmbeddingProvider,
) -> Result<UserProfileEmbedding, EmbedError> {
    if history.samples.is_empty() {
        return Err(EmbedError::EmptyHistory);
    }
    let mut texts: Vec<&str> = history
        .samples
        .iter()
        .map(|s| s.review_text.as_str())
        .collect();
    texts.sort_unstable();
    let embeddings = texts
        .iter()
        .map(|t| embed_text(t, provider))
        .collect::<Result<Vec<_>, _>>()?;
    let dim = provider.dim();
    let mut mean = vec![0.0; dim];
    for e in &embeddings {
        if e.dim() != dim {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                actual: e.dim(),
            });
        }
        for (acc, v) in mean.iter_mut().zip(&e.values) {
            *acc += v;
        }
    }
    let n = embeddings.len() as f64;
    for v in &mut mean {
        *v /= n;
    }
    let vector = EmbeddingVector::new(mean)?.normalized()?;
    Ok(UserProfileEmbedding {
        user_id: history.user_id.clone(),
        vector,
    })
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET ^ seed.wrapping_mul(FNV_PRIME);
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Deterministic offline provider: token 1–3-gram features hashed into
/// `dim` buckets, L2-normalized. A pure function of (text, dim, seed).
#[derive(Debug, Clone)]
pub struct HashEmbeddingProvider {
    pub dim: usize,
    pub seed: u64,
}

impl HashEmbeddingProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        HashEmbeddingProvider { dim, seed }
    }

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let tokens = tokenize(text);
        let mut buckets = vec![0.0f64; self.dim];
        let mut any = false;
        for n in 1..=3usize {
            if tokens.len() < n {
                break;
            }
            for gram in tokens.tokens().windows(n) {
                let key = gram.join("\u{1f}");
                let h = fnv1a(self.seed.wrapping_add(n as u64), key.as_bytes());
                buckets[(h % self.dim as u64) as usize] += 1.0;
                any = true;
            }
        }
        if !any {
            // Text with no word tokens (all punctuation): hash it whole.
            let h = fnv1a(self.seed, text.trim().as_bytes());
            buckets[(h % self.dim as u64) as usize] += 1.0;
        }
        EmbeddingVector::new(buckets)?.normalized()
    }
}

impl EmbeddingProvider for HashEmbeddingProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

/// Remote provider speaking the `/v1/embeddings` wire protocol.
pub struct RemoteEmbeddingProvider {
    base_url: String,
    model: String,
    dim: usize,
    timeout: std::time::Duration,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbeddingsRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingsDatum>,
}

#[derive(Deserialize)]
struct EmbeddingsDatum {
    embedding: Vec<f64>,
}

impl RemoteEmbeddingProvider {
    pub fn new(base_url: &str, model: &str, dim: usize, timeout_s: u64) -> Self {
        RemoteEmbeddingProvider {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            dim,
            timeout: std::time::Duration::from_secs(timeout_s),
            client: reqwest::blocking::Client::new(),
        }
    }

    fn api_key() -> String {
        std::env::var("DRP_API_KEY").unwrap_or_default()
    }
}

impl EmbeddingProvider for RemoteEmbeddingProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let url = format!("{}/v1/embeddings", self.base_url);
        let body = EmbeddingsRequest {
            model: &self.model,
            input: texts,
        };
        let response = self
            .client
            .post(&url)
            .timeout(self.timeout)
            .bearer_auth(Self::api_key())
            .json(&body)
            .send()
            .map_err(|e| EmbedError::Provider(e.to_string()))?;
        if !response.status().is_success() {
            return Err(EmbedError::Provider(format!(
                "HTTP {}",
                response.status().as_u16()
            )));
        }
        let parsed: EmbeddingsResponse = response
            .json()
            .map_err(|e| EmbedError::Provider(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::Provider(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        parsed
            .data
            .into_iter()
            .map(|d| {
                if d.embedding.len() != self.dim {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.dim,
                        actual: d.embedding.len(),
                    });
                }
                EmbeddingVector::new(d.embedding)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ReviewSample;

    fn sample(user: &str, item: &str, text: &str, ts: i64) -> ReviewSample {
        ReviewSample {
            user_id: user.into(),
            item_id: item.into(),
            item_title: format!("title {item}"),
            item_description: String::new(),
            review_text: text.into(),
            timestamp: ts,
            rating: None,
        }
    }

    #[test]
    fn hash_provider_is_deterministic() {
        let provider = HashEmbeddingProvider::new(8, 42);
        let a = embed_text("abc def", &provider).unwrap();
        let b = embed_text("abc def", &provider).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 8);
        assert!((a.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_text_rejected() {
        let provider = HashEmbeddingProvider::new(8, 42);
        assert!(matches!(
            embed_text("", &provider),
            Err(EmbedError::EmptyText)
        ));
        assert!(matches!(
            embed_text("   ", &provider),
            Err(EmbedError::EmptyText)
        ));
    }

    #[test]
    fn distinct_texts_distinct_vectors() {
        // 100-text fixture: pairwise inequality under the hash provider.
        let provider = HashEmbeddingProvider::new(32, 7);
        let texts: Vec<String> = (0..100)
            .map(|i| format!("review number {i} talks about item quality {}", i * 3))
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vectors = provider.embed_batch(&refs).unwrap();
        for i in 0..vectors.len() {
            for j in (i + 1)..vectors.len() {
                assert_ne!(vectors[i], vectors[j], "texts {i} and {j} collided");
            }
        }
    }

    #[test]
    fn profile_is_normalized_mean() {
        struct Stub;
        impl EmbeddingProvider for Stub {
            fn dim(&self) -> usize {
                2
            }
            fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
                texts
                    .iter()
                    .map(|t| {
                        let v = match *t {
                            "a" => vec![1.0, 0.0],
                            "b" => vec![0.0, 1.0],
                            "c" => vec![1.0, 1.0],
                            other => panic!("unexpected text {other}"),
                        };
                        EmbeddingVector::new(v)
                    })
                    .collect()
            }
        }
        let history = UserHistory {
            user_id: "u".into(),
            samples: vec![
                sample("u", "1", "a", 1),
                sample("u", "2", "b", 2),
                sample("u", "3", "c", 3),
            ],
        };
        let profile = profile_embedding(&history, &Stub).unwrap();
        // mean = (2/3, 2/3), normalized = (1/sqrt 2, 1/sqrt 2)
        let expected = 1.0 / 2.0f64.sqrt();
        assert!((profile.vector.values[0] - expected).abs() < 1e-12);
        assert!((profile.vector.values[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn opposite_embeddings_yield_zero_vector_error() {
        struct Stub;
        impl EmbeddingProvider for Stub {
            fn dim(&self) -> usize {
                2
            }
            fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
                texts
                    .iter()
                    .map(|t| {
                        let v = if *t == "plus" {
                            vec![1.0, 0.0]
                        } else {
                            vec![-1.0, 0.0]
                        };
                        EmbeddingVector::new(v)
                    })
                    .collect()
            }
        }
        let history = UserHistory {
            user_id: "u".into(),
            samples: vec![sample("u", "1", "plus", 1), sample("u", "2", "minus", 2)],
        };
        assert!(matches!(
            profile_embedding(&history, &Stub),
            Err(EmbedError::ZeroVector)
        ));
    }

    #[test]
    fn profile_invariant_to_sample_order() {
        let provider = HashEmbeddingProvider::new(16, 3);
        let mut samples = vec![
            sample("u", "1", "first review text here", 1),
            sample("u", "2", "second opinion entirely different", 2),
            sample("u", "3", "third thoughts on the matter", 3),
        ];
        let a = profile_embedding(
            &UserHistory {
                user_id: "u".into(),
                samples: samples.clone(),
            },
            &provider,
        )
        .unwrap();
        samples.reverse();
        let b = profile_embedding(
            &UserHistory {
                user_id: "u".into(),
                samples,
            },
            &provider,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_sample_profile_equals_normalized_embedding() {
        let provider = HashEmbeddingProvider::new(16, 3);
        let history = UserHistory {
            user_id: "u".into(),
            samples: vec![sample("u", "1", "only one review", 1)],
        };
        let profile = profile_embedding(&history, &provider).unwrap();
        let direct = embed_text("only one review", &provider).unwrap();
        assert_eq!(profile.vector, direct.normalized().unwrap());
    }

    #[test]
    fn empty_history_rejected() {
        let provider = HashEmbeddingProvider::new(8, 1);
        let history = UserHistory {
            user_id: "u".into(),
            samples: vec![],
        };
        assert!(matches!(
            profile_embedding(&history, &provider),
            Err(EmbedError::EmptyHistory)
        ));
    }

    #[test]
    fn scale_invariant_normalization() {
        let v = EmbeddingVector::new(vec![3.0, 4.0]).unwrap();
        let scaled = EmbeddingVector::new(vec![300.0, 400.0]).unwrap();
        let a = v.normalized().unwrap();
        let b = scaled.normalized().unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
