//! From-scratch text-generation metrics: BLEU, METEOR, ROUGE-1, ROUGE-L,
//! plus per-run aggregation and multi-temperature averaging.
//!
//! All metrics share one canonical tokenizer ([`tokenize`]) so scores are
//! comparable. Corpus BLEU is computed at the corpus level (clipped counts
//! summed before the geometric mean); METEOR and ROUGE aggregate as
//! arithmetic means of per-sample scores.

mod bleu;
mod meteor;
mod rouge;
mod stem;
mod tokenize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::pipeline::GeneratedReview;

pub use bleu::{bleu, sentence_bleu};
pub use meteor::{align, fragmentation_penalty, meteor, meteor_detail, MeteorDetail};
pub use rouge::{lcs_length, rouge_1, rouge_l, PrfScore};
pub use stem::porter_stem;
pub use tokenize::{tokenize, TokenSequence};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("hypothesis/reference counts differ or are empty: {hypotheses} vs {references}")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },
    #[error("metric requires nonempty token sequences")]
    EmptyInput,
    #[error("no test reference for user {user_id}, item {item_id}")]
    MissingReference { user_id: String, item_id: String },
    #[error("reports cover different sample sets")]
    SampleSetMismatch,
}

/// Scores for one generated review against its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub user_id: String,
    pub item_id: String,
    pub bleu: f64,
    pub meteor: f64,
    pub rouge1_f: f64,
    pub rouge_l_f: f64,
}

/// Corpus-level aggregates. BLEU is corpus-level (not a mean of sentence
/// BLEU); the other three are arithmetic means over samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub bleu: f64,
    pub meteor: f64,
    pub rouge1_f: f64,
    pub rouge_l_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_sample: Vec<SampleScore>,
    pub corpus: CorpusScores,
    pub n_samples: usize,
}

/// Score a run's generations against the corpus test references.
///
/// The reference for each generation is the test sample's review text,
/// keyed by (user_id, item_id). Samples where either side tokenizes to
/// nothing score 0 on the per-sample metrics.
pub fn evaluate_run(
    generations: &[GeneratedReview],
    corpus: &Corpus,
) -> Result<MetricReport, MetricsError> {
    let references: BTreeMap<(&str, &str), &str> = corpus
        .test
        .iter()
        .map(|s| {
            (
                (s.user_id.as_str(), s.item_id.as_str()),
                s.review_text.as_str(),
            )
        })
        .collect();

    let mut ordered: Vec<&GeneratedReview> = generations.iter().collect();
    ordered.sort_by(|a, b| (&a.target_user, &a.item_id).cmp(&(&b.target_user, &b.item_id)));

    let mut hyps = Vec::with_capacity(ordered.len());
    let mut refs = Vec::with_capacity(ordered.len());
    let mut per_sample = Vec::with_capacity(ordered.len());
    for generation in &ordered {
        let reference_text = references
            .get(&(generation.target_user.as_str(), generation.item_id.as_str()))
            .ok_or_else(|| MetricsError::MissingReference {
                user_id: generation.target_user.clone(),
                item_id: generation.item_id.clone(),
            })?;
        let hyp = tokenize(&generation.text);
        let reference = tokenize(reference_text);
        let nonempty = !hyp.is_empty() && !reference.is_empty();
        per_sample.push(SampleScore {
            user_id: generation.target_user.clone(),
            item_id: generation.item_id.clone(),
            bleu: sentence_bleu(&hyp, &reference, 4),
            meteor: if nonempty {
                meteor(&hyp, &reference).expect("nonempty")
            } else {
                0.0
            },
            rouge1_f: if nonempty {
                rouge_1(&hyp, &reference).expect("nonempty").f1
            } else {
                0.0
            },
            rouge_l_f: if nonempty {
                rouge_l(&hyp, &reference).expect("nonempty").f1
            } else {
                0.0
            },
        });
        hyps.push(hyp);
        refs.push(reference);
    }

    let n = per_sample.len();
    let mean =
        |f: fn(&SampleScore) -> f64| -> f64 { per_sample.iter().map(f).sum::<f64>() / n as f64 };
    let corpus_scores = CorpusScores {
        bleu: bleu::bleu(&hyps, &refs, 4)?,
        meteor: mean(|s| s.meteor),
        rouge1_f: mean(|s| s.rouge1_f),
        rouge_l_f: mean(|s| s.rouge_l_f),
    };
    Ok(MetricReport {
        per_sample,
        corpus: corpus_scores,
        n_samples: n,
    })
}

/// Field-wise arithmetic mean of reports over the same sample set,
/// realizing the two-temperature averaging protocol.
pub fn average_reports(reports: &[MetricReport]) -> Result<MetricReport, MetricsError> {
    let first = reports.first().ok_or(MetricsError::SampleSetMismatch)?;
    let keys: Vec<(&str, &str)> = first
        .per_sample
        .iter()
        .map(|s| (s.user_id.as_str(), s.item_id.as_str()))
        .collect();
    for report in reports {
        let same = report.per_sample.len() == keys.len()
            && report
                .per_sample
                .iter()
                .zip(&keys)
                .all(|(s, k)| (s.user_id.as_str(), s.item_id.as_str()) == *k);
        if !same {
            return Err(MetricsError::SampleSetMismatch);
        }
    }
    let count = reports.len() as f64;
    let per_sample = (0..keys.len())
        .map(|i| SampleScore {
            user_id: first.per_sample[i].user_id.clone(),
            item_id: first.per_sample[i].item_id.clone(),
            bleu: reports.iter().map(|r| r.per_sample[i].bleu).sum::<f64>() / count,
            meteor: reports.iter().map(|r| r.per_sample[i].meteor).sum::<f64>() / count,
            rouge1_f: reports
                .iter()
                .map(|r| r.per_sample[i].rouge1_f)
                .sum::<f64>()
                / count,
            rouge_l_f: reports
                .iter()
                .map(|r| r.per_sample[i].rouge_l_f)
                .sum::<f64>()
                / count,
        })
        .collect();
    let corpus = CorpusScores {
        bleu: reports.iter().map(|r| r.corpus.bleu).sum::<f64>() / count,
        meteor: reports.iter().map(|r| r.corpus.meteor).sum::<f64>() / count,
        rouge1_f: reports.iter().map(|r| r.corpus.rouge1_f).sum::<f64>() / count,
        rouge_l_f: reports.iter().map(|r| r.corpus.rouge_l_f).sum::<f64>() / count,
    };
    Ok(MetricReport {
        per_sample,
        corpus,
        n_samples: first.n_samples,
    })
}
