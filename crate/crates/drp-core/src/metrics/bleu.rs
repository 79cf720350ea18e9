//! Corpus-level and sentence-level BLEU.

use std::collections::HashMap;

use super::tokenize::TokenSequence;
use super::MetricsError;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and the hypothesis n-gram total for one pair.
fn clipped_matches(hyp: &[String], reference: &[String], n: usize) -> (u64, u64) {
    let hyp_counts = ngram_counts(hyp, n);
    let ref_counts = ngram_counts(reference, n);
    let matches = hyp_counts
        .iter()
        .map(|(gram, &count)| count.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    let total = hyp.len().saturating_sub(n - 1) as u64;
    (matches, total)
}

/// Corpus-level BLEU in [0, 100].
///
/// Clipped matches and totals are summed over the corpus per n-gram order,
/// the score is the geometric mean of p_1..p_max_n times the brevity
/// penalty, scaled by 100. Any zero corpus-level p_n makes the score 0.
pub fn bleu(
    hypotheses: &[TokenSequence],
    references: &[TokenSequence],
    max_n: usize,
) -> Result<f64, MetricsError> {
    if hypotheses.len() != references.len() || hypotheses.is_empty() {
        return Err(MetricsError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    let mut matches = vec![0u64; max_n];
    let mut totals = vec![0u64; max_n];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len() as u64;
        ref_len += reference.len() as u64;
        for n in 1..=max_n {
            let (m, t) = clipped_matches(hyp.tokens(), reference.tokens(), n);
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    let mut log_sum = 0.0;
    for n in 0..max_n {
        if matches[n] == 0 || totals[n] == 0 {
            return Ok(0.0);
        }
        log_sum += (matches[n] as f64 / totals[n] as f64).ln();
    }
    Ok(100.0 * brevity_penalty(hyp_len, ref_len) * (log_sum / max_n as f64).exp())
}

/// exp(1 - r/c) when c <= r, else 1.
fn brevity_penalty(hyp_len: u64, ref_len: u64) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len <= ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    }
}

/// Sentence-level BLEU in [0, 100], a per-sample diagnostic.
///
/// Uses add-1 smoothing on numerator and denominator for n >= 2; p_1 is
/// unsmoothed, so a hypothesis sharing no unigram with the reference
/// scores 0.
pub fn sentence_bleu(hyp: &TokenSequence, reference: &TokenSequence, max_n: usize) -> f64 {
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (m, t) = clipped_matches(hyp.tokens(), reference.tokens(), n);
        let p = if n == 1 {
            if m == 0 || t == 0 {
                return 0.0;
            }
            m as f64 / t as f64
        } else {
            (m + 1) as f64 / (t + 1) as f64
        };
        log_sum += p.ln();
    }
    100.0
        * brevity_penalty(hyp.len() as u64, reference.len() as u64)
        * (log_sum / max_n as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize::tokenize;

    #[test]
    fn perfect_match_is_100() {
        let text = tokenize("the quick brown fox jumps over the lazy dog");
        let score = bleu(std::slice::from_ref(&text), std::slice::from_ref(&text), 4).unwrap();
        assert!((score - 100.0).abs() < 1e-9);
    }

    #[test]
    fn worked_example() {
        // p1 = 5/6, p2 = 3/5, p3 = 2/4, p4 = 1/3, BP = 1.
        let hyp = tokenize("the cat sat on the mat");
        let reference = tokenize("the cat sat on a mat");
        let score = bleu(&[hyp], &[reference], 4).unwrap();
        let expected = 100.0 * (5.0 / 6.0 * 3.0 / 5.0 * 2.0 / 4.0 * 1.0 / 3.0f64).powf(0.25);
        assert!((score - expected).abs() < 1e-9);
        assert!((score - 53.73).abs() < 0.01);
    }

    #[test]
    fn zero_when_no_common_4gram() {
        let hyp = tokenize("a b c d e");
        let reference = tokenize("a b c x e");
        assert_eq!(bleu(&[hyp], &[reference], 4).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let t = tokenize("a b");
        assert!(matches!(
            bleu(&[t.clone(), t.clone()], std::slice::from_ref(&t), 4),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(
            bleu(&[], &[], 4),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn brevity_penalty_direction() {
        // Shorter hypothesis, otherwise matching prefix.
        let reference = tokenize("a b c d e f g h");
        let long = tokenize("a b c d e f");
        let short = tokenize("a b c d e");
        let bp_long = sentence_bleu(&long, &reference, 4);
        let bp_short = sentence_bleu(&short, &reference, 4);
        assert!(bp_short < bp_long);
    }
}
