//! METEOR with the classic exact + Porter-stem matching stages.
//!
//! Alignment per stage: a monotone backbone (maximum non-crossing matching
//! via LCS) followed by left-to-right completion of the remaining
//! per-token capacity. This always reaches the maximum-cardinality
//! alignment of the stage; crossing minimization beyond the monotone
//! backbone is heuristic.

use super::stem::porter_stem;
use super::tokenize::TokenSequence;
use super::MetricsError;

/// Full scoring breakdown, useful for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeteorDetail {
    pub matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
    pub score: f64,
}

/// METEOR score in [0, 1].
pub fn meteor(hyp: &TokenSequence, reference: &TokenSequence) -> Result<f64, MetricsError> {
    meteor_detail(hyp, reference).map(|d| d.score)
}

pub fn meteor_detail(
    hyp: &TokenSequence,
    reference: &TokenSequence,
) -> Result<MeteorDetail, MetricsError> {
    if hyp.is_empty() || reference.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let pairs = align(hyp.tokens(), reference.tokens());
    let m = pairs.len();
    if m == 0 {
        return Ok(MeteorDetail {
            matches: 0,
            chunks: 0,
            precision: 0.0,
            recall: 0.0,
            fmean: 0.0,
            penalty: 0.0,
            score: 0.0,
        });
    }
    let chunks = count_chunks(&pairs);
    let precision = m as f64 / hyp.len() as f64;
    let recall = m as f64 / reference.len() as f64;
    let fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let penalty = fragmentation_penalty(chunks, m);
    Ok(MeteorDetail {
        matches: m,
        chunks,
        precision,
        recall,
        fmean,
        penalty,
        score: fmean * (1.0 - penalty),
    })
}

/// 0.5 * (chunks / matches)^3.
pub fn fragmentation_penalty(chunks: usize, matches: usize) -> f64 {
    0.5 * (chunks as f64 / matches as f64).powi(3)
}

/// Two-stage unigram alignment: exact tokens first, Porter stems on the
/// leftovers. Returns (hyp_pos, ref_pos) pairs sorted by hyp position.
pub fn align(hyp: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut hyp_taken = vec![false; hyp.len()];
    let mut ref_taken = vec![false; reference.len()];
    let mut pairs = Vec::new();

    let exact_h: Vec<&str> = hyp.iter().map(String::as_str).collect();
    let exact_r: Vec<&str> = reference.iter().map(String::as_str).collect();
    stage(
        &exact_h,
        &exact_r,
        &mut hyp_taken,
        &mut ref_taken,
        &mut pairs,
    );

    let stem_h: Vec<String> = hyp.iter().map(|t| porter_stem(t)).collect();
    let stem_r: Vec<String> = reference.iter().map(|t| porter_stem(t)).collect();
    let stem_h_refs: Vec<&str> = stem_h.iter().map(String::as_str).collect();
    let stem_r_refs: Vec<&str> = stem_r.iter().map(String::as_str).collect();
    stage(
        &stem_h_refs,
        &stem_r_refs,
        &mut hyp_taken,
        &mut ref_taken,
        &mut pairs,
    );

    pairs.sort_unstable();
    pairs
}

/// One matching stage over the still-unmatched positions.
fn stage(
    hyp_keys: &[&str],
    ref_keys: &[&str],
    hyp_taken: &mut [bool],
    ref_taken: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
) {
    let free_h: Vec<usize> = (0..hyp_keys.len()).filter(|&i| !hyp_taken[i]).collect();
    let free_r: Vec<usize> = (0..ref_keys.len()).filter(|&j| !ref_taken[j]).collect();
    if free_h.is_empty() || free_r.is_empty() {
        return;
    }

    // Monotone backbone: LCS over the free positions.
    let n = free_h.len();
    let m = free_r.len();
    let mut dp = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if hyp_keys[free_h[i]] == ref_keys[free_r[j]] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if hyp_keys[free_h[i]] == ref_keys[free_r[j]] && dp[i][j] == dp[i + 1][j + 1] + 1 {
            hyp_taken[free_h[i]] = true;
            ref_taken[free_r[j]] = true;
            pairs.push((free_h[i], free_r[j]));
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }

    // Left-to-right completion of remaining per-token capacity.
    for &hi in &free_h {
        if hyp_taken[hi] {
            continue;
        }
        if let Some(&rj) = free_r
            .iter()
            .find(|&&rj| !ref_taken[rj] && ref_keys[rj] == hyp_keys[hi])
        {
            hyp_taken[hi] = true;
            ref_taken[rj] = true;
            pairs.push((hi, rj));
        }
    }
}

/// Minimal contiguous in-order runs covering the alignment.
fn count_chunks(sorted_pairs: &[(usize, usize)]) -> usize {
    let mut chunks = 0;
    let mut prev: Option<(usize, usize)> = None;
    for &(h, r) in sorted_pairs {
        match prev {
            Some((ph, pr)) if h == ph + 1 && r == pr + 1 => {}
            _ => chunks += 1,
        }
        prev = Some((h, r));
    }
    chunks
}
