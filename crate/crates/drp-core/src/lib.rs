//! Difference-aware personalization pipeline and evaluation harness.
//!
//! The library is organized around the stages of a difference-aware
//! review-generation run:
//!
//! - [`corpus`] — review dataset ingestion, per-user histories, train/test split
//! - [`embed`] — text and user-profile embeddings (remote or deterministic hash provider)
//! - [`cluster`] — k-means over user profiles and cross-cluster representative selection
//! - [`retrieve`] — key-history retrieval used as context for extraction and generation
//! - [`gateway`] — provider-neutral chat completions with mocking and a persistent cache
//! - [`pipeline`] — difference extraction, reflective validation, summarization, generation
//! - [`metrics`] — from-scratch BLEU, METEOR, ROUGE-1, ROUGE-L and report aggregation
//! - [`uvq`] — feature validity judging, dedup/conflict removal, unique-valid-quantity analysis
//!
//! Everything runs offline against mock providers; see [`pipeline::mockgen`] for
//! generating a self-consistent mock fixture set for a corpus + config.
//!
//! ## Example: scoring a generation against its reference
//!
//! ```
//! use drp_core::metrics::{rouge_1, tokenize};
//!
//! let hyp = tokenize("the cat sat");
//! let reference = tokenize("The cat sat on the mat.");
//! let score = rouge_1(&hyp, &reference).unwrap();
//! assert!((score.f1 - 2.0 / 3.0).abs() < 1e-12);
//! ```

pub mod cluster;
pub mod corpus;
pub mod embed;
pub mod gateway;
pub mod metrics;
pub mod pipeline;
pub mod retrieve;
pub mod uvq;

pub use cluster::{ClusterModel, KmeansParams, RepresentativeSet};
pub use corpus::{Corpus, ReviewSample, UserHistory};
pub use embed::{EmbeddingProvider, EmbeddingVector, HashEmbeddingProvider, UserProfileEmbedding};
pub use gateway::{
    ChatMessage, ChatRequest, ChatResponse, Gateway, ProviderKind, ProviderSpec, Role,
};
pub use metrics::{MetricReport, TokenSequence};
pub use pipeline::{
    DifferenceDimension, DifferenceFeature, DifferenceReport, Direction, GeneratedReview, Mode,
    RunConfig, UserDifferenceSummary, ValidatedReport,
};
pub use retrieve::{RetrievalMode, RetrievedHistory};
pub use uvq::{FeatureCategory, UvqReport, ValidityVerdict};
