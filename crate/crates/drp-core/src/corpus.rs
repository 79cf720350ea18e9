//! Review dataset ingestion and the train/test partition.
//!
//! Datasets are line-delimited JSON, one sample per line, with an explicit
//! `split` field; see [`load_corpus`]. A corpus is immutable after loading
//! and safe to share across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("train/test partition violation: {0}")]
    Partition(String),
    #[error("user {0} has no train samples")]
    UnknownUser(String),
}

/// One (user, item, text) sample of the historical dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSample {
    pub user_id: String,
    pub item_id: String,
    pub item_title: String,
    #[serde(default)]
    pub item_description: String,
    pub review_text: String,
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
}

impl ReviewSample {
    fn validate(&self) -> Result<(), String> {
        if self.user_id.is_empty() {
            return Err("user_id is empty".into());
        }
        if self.item_id.is_empty() {
            return Err("item_id is empty".into());
        }
        if self.review_text.trim().is_empty() {
            return Err("review_text is empty".into());
        }
        if self.timestamp < 0 {
            return Err(format!("timestamp {} is negative", self.timestamp));
        }
        if let Some(rating) = self.rating {
            if !(1.0..=5.0).contains(&rating) || !rating.is_finite() {
                return Err(format!("rating {rating} outside [1, 5]"));
            }
        }
        Ok(())
    }
}

/// A user's train samples in canonical order: timestamp ascending, ties
/// broken by item_id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserHistory {
    pub user_id: String,
    pub samples: Vec<ReviewSample>,
}

/// The loaded dataset: train/test samples plus a name for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub dataset_name: String,
    pub train: Vec<ReviewSample>,
    pub test: Vec<ReviewSample>,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    user_id: String,
    item_id: String,
    item_title: String,
    #[serde(default)]
    item_description: String,
    review_text: String,
    timestamp: i64,
    #[serde(default)]
    rating: Option<f64>,
    split: String,
}

#[derive(Debug, Serialize)]
struct OutRecord<'a> {
    user_id: &'a str,
    item_id: &'a str,
    item_title: &'a str,
    item_description: &'a str,
    review_text: &'a str,
    timestamp: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rating: Option<f64>,
    split: &'a str,
}

/// Supported input formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatTag {
    Jsonl,
}

fn canonical_order(a: &ReviewSample, b: &ReviewSample) -> std::cmp::Ordering {
    (a.timestamp, &a.item_id).cmp(&(b.timestamp, &b.item_id))
}

/// Load a corpus from a JSONL file.
///
/// Blank lines are skipped; malformed lines are rejected with their
/// 1-based line number. The partition invariants — no (user, item) in
/// both splits, every test user has train history — are enforced here.
pub fn load_corpus(path: &Path, _format: FormatTag) -> Result<Corpus, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        let sample = ReviewSample {
            user_id: record.user_id,
            item_id: record.item_id,
            item_title: record.item_title,
            item_description: record.item_description,
            review_text: record.review_text,
            timestamp: record.timestamp,
            rating: record.rating,
        };
        sample.validate().map_err(|reason| CorpusError::Parse {
            line: line_no,
            reason,
        })?;
        match record.split.as_str() {
            "train" => train.push(sample),
            "test" => test.push(sample),
            other => {
                return Err(CorpusError::Parse {
                    line: line_no,
                    reason: format!("unknown split {other:?} (expected \"train\" or \"test\")"),
                })
            }
        }
    }

    train.sort_by(|a, b| {
        (&a.user_id, a.timestamp, &a.item_id).cmp(&(&b.user_id, b.timestamp, &b.item_id))
    });
    test.sort_by(|a, b| {
        (&a.user_id, a.timestamp, &a.item_id).cmp(&(&b.user_id, b.timestamp, &b.item_id))
    });

    let dataset_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string());
    let corpus = Corpus {
        dataset_name,
        train,
        test,
    };
    corpus.check_partition()?;
    Ok(corpus)
}

/// Serialize a corpus back to the JSONL format, canonical sample order.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let mut out = Vec::new();
    for (samples, split) in [(&corpus.train, "train"), (&corpus.test, "test")] {
        for s in samples.iter() {
            let record = OutRecord {
                user_id: &s.user_id,
                item_id: &s.item_id,
                item_title: &s.item_title,
                item_description: &s.item_description,
                review_text: &s.review_text,
                timestamp: s.timestamp,
                rating: s.rating,
                split,
            };
            out.extend_from_slice(
                serde_json::to_string(&record)
                    .expect("serializable")
                    .as_bytes(),
            );
            out.push(b'\n');
        }
    }
    let mut file = fs::File::create(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(&out).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl Corpus {
    fn check_partition(&self) -> Result<(), CorpusError> {
        let train_pairs: BTreeSet<(&str, &str)> = self
            .train
            .iter()
            .map(|s| (s.user_id.as_str(), s.item_id.as_str()))
            .collect();
        for sample in &self.test {
            if train_pairs.contains(&(sample.user_id.as_str(), sample.item_id.as_str())) {
                return Err(CorpusError::Partition(format!(
                    "({}, {}) appears in both train and test",
                    sample.user_id, sample.item_id
                )));
            }
        }
        let train_users: BTreeSet<&str> = self.train.iter().map(|s| s.user_id.as_str()).collect();
        for sample in &self.test {
            if !train_users.contains(sample.user_id.as_str()) {
                return Err(CorpusError::Partition(format!(
                    "test user {} has no train history",
                    sample.user_id
                )));
            }
        }
        Ok(())
    }

    /// All train samples of a user, canonical order.
    pub fn user_history(&self, user_id: &str) -> Result<UserHistory, CorpusError> {
        let mut samples: Vec<ReviewSample> = self
            .train
            .iter()
            .filter(|s| s.user_id == user_id)
            .cloned()
            .collect();
        if samples.is_empty() {
            return Err(CorpusError::UnknownUser(user_id.to_string()));
        }
        samples.sort_by(canonical_order);
        Ok(UserHistory {
            user_id: user_id.to_string(),
            samples,
        })
    }

    /// Distinct train users, lexicographically sorted.
    pub fn all_users(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.train.iter().map(|s| s.user_id.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Per-split sample counts grouped by user, for ingest summaries.
    pub fn per_user_counts(&self) -> BTreeMap<String, (usize, usize)> {
        let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for s in &self.train {
            counts.entry(s.user_id.clone()).or_default().0 += 1;
        }
        for s in &self.test {
            counts.entry(s.user_id.clone()).or_default().1 += 1;
        }
        counts
    }
}
