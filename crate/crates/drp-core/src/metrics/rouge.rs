//! ROUGE-1 (clipped unigram overlap) and ROUGE-L (longest common subsequence).

use std::collections::HashMap;

use super::tokenize::TokenSequence;
use super::MetricsError;

/// Precision, recall, F1 triple in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfScore {
    fn from_overlap(overlap: f64, hyp_len: usize, ref_len: usize) -> Self {
        let precision = overlap / hyp_len as f64;
        let recall = overlap / ref_len as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PrfScore {
            precision,
            recall,
            f1,
        }
    }
}

fn check_nonempty(hyp: &TokenSequence, reference: &TokenSequence) -> Result<(), MetricsError> {
    if hyp.is_empty() || reference.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

/// ROUGE-1: clipped unigram overlap.
pub fn rouge_1(hyp: &TokenSequence, reference: &TokenSequence) -> Result<PrfScore, MetricsError> {
    check_nonempty(hyp, reference)?;
    let mut ref_counts: HashMap<&str, u64> = HashMap::new();
    for token in reference.tokens() {
        *ref_counts.entry(token).or_insert(0) += 1;
    }
    let mut overlap = 0u64;
    for token in hyp.tokens() {
        if let Some(count) = ref_counts.get_mut(token.as_str()) {
            if *count > 0 {
                *count -= 1;
                overlap += 1;
            }
        }
    }
    Ok(PrfScore::from_overlap(
        overlap as f64,
        hyp.len(),
        reference.len(),
    ))
}

/// Longest common subsequence length via the standard DP.
pub fn lcs_length(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L: LCS-based precision/recall/F1.
pub fn rouge_l(hyp: &TokenSequence, reference: &TokenSequence) -> Result<PrfScore, MetricsError> {
    check_nonempty(hyp, reference)?;
    let lcs = lcs_length(hyp.tokens(), reference.tokens());
    Ok(PrfScore::from_overlap(
        lcs as f64,
        hyp.len(),
        reference.len(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize::tokenize;

    #[test]
    fn rouge_1_worked_example() {
        // Overlap clips "the" to its reference count of 2.
        let hyp = tokenize("the cat sat");
        let reference = tokenize("the cat sat on the mat");
        let score = rouge_1(&hyp, &reference).unwrap();
        assert!((score.precision - 1.0).abs() < 1e-12);
        assert!((score.recall - 0.5).abs() < 1e-12);
        assert!((score.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rouge_l_worked_example() {
        let hyp = tokenize("the cat sat");
        let reference = tokenize("the cat sat on the mat");
        let score = rouge_l(&hyp, &reference).unwrap();
        assert!((score.precision - 1.0).abs() < 1e-12);
        assert!((score.recall - 0.5).abs() < 1e-12);
        assert!((score.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_sequences_score_one() {
        let t = tokenize("alpha beta gamma");
        for score in [rouge_1(&t, &t).unwrap(), rouge_l(&t, &t).unwrap()] {
            assert_eq!((score.precision, score.recall, score.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn disjoint_sequences_score_zero() {
        let a = tokenize("alpha beta");
        let b = tokenize("gamma delta");
        for score in [rouge_1(&a, &b).unwrap(), rouge_l(&a, &b).unwrap()] {
            assert_eq!((score.precision, score.recall, score.f1), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn reversed_three_tokens_lcs_is_one() {
        let a = tokenize("a b c");
        let b = tokenize("c b a");
        let score = rouge_l(&a, &b).unwrap();
        assert!((score.precision - 1.0 / 3.0).abs() < 1e-12);
        assert!((score.recall - 1.0 / 3.0).abs() < 1e-12);
        assert!((score.f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_input_rejected() {
        let t = tokenize("a");
        let empty = tokenize("");
        assert!(matches!(rouge_1(&t, &empty), Err(MetricsError::EmptyInput)));
        assert!(matches!(rouge_l(&empty, &t), Err(MetricsError::EmptyInput)));
    }
}
