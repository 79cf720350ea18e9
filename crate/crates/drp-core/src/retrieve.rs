//! Key-history retrieval: the per-user context slice fed to difference
//! extraction and generation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ReviewSample, UserHistory};
use crate::embed::{embed_text, EmbedError, EmbeddingProvider};

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("history has no samples")]
    EmptyHistory,
    #[error("k must be >= 1")]
    ZeroK,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// How entries are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    /// Cosine similarity between the query embedding and each review.
    Similarity,
    /// Timestamp as the score; no provider calls.
    Recency,
}

/// Top-k history slice with scores, ordered score desc, then timestamp
/// desc, then item_id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedHistory {
    pub user_id: String,
    pub entries: Vec<(ReviewSample, f64)>,
    pub k_requested: usize,
    pub query_text: String,
}

/// Select the key historical data for one user against a query.
pub fn retrieve_key_history(
    history: &UserHistory,
    query_text: &str,
    k: usize,
    mode: RetrievalMode,
    provider: &dyn EmbeddingProvider,
) -> Result<RetrievedHistory, RetrieveError> {
    if history.samples.is_empty() {
        return Err(RetrieveError::EmptyHistory);
    }
    if k == 0 {
        return Err(RetrieveError::ZeroK);
    }
    let mut scored: Vec<(ReviewSample, f64)> = match mode {
        RetrievalMode::Recency => history
            .samples
            .iter()
            .map(|s| (s.clone(), s.timestamp as f64))
            .collect(),
        RetrievalMode::Similarity => {
            let query = embed_text(query_text, provider)?;
            history
                .samples
                .iter()
                .map(|s| {
                    let e = embed_text(&s.review_text, provider)?;
                    Ok((s.clone(), query.cosine(&e)))
                })
                .collect::<Result<_, RetrieveError>>()?
        }
    };
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite scores")
            .then(b.0.timestamp.cmp(&a.0.timestamp))
            .then(a.0.item_id.cmp(&b.0.item_id))
    });
    scored.truncate(k);
    Ok(RetrievedHistory {
        user_id: history.user_id.clone(),
        entries: scored,
        k_requested: k,
        query_text: query_text.to_string(),
    })
}
