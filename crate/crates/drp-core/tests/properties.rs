//! Property tests for the library's contract invariants: metric ranges
//! and symmetries, brevity-penalty monotonicity, tokenizer guarantees,
//! Pearson affine invariance, and cache idempotence.

use std::collections::BTreeSet;

use proptest::prelude::*;

use drp_core::gateway::{canonical_request_hash, ChatMessage, ChatRequest, Gateway, ProviderSpec};
use drp_core::metrics::{
    average_reports, bleu, meteor, rouge_1, rouge_l, sentence_bleu, tokenize, CorpusScores,
    MetricReport, SampleScore, TokenSequence,
};
use drp_core::uvq::pearson;

fn token_vec(max_len: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(&["red", "blue", "cat", "dog", "runs", "fast", "slow", "very"]),
        1..max_len,
    )
    .prop_map(|tokens| tokens.into_iter().map(str::to_string).collect())
}

fn seq(tokens: Vec<String>) -> TokenSequence {
    TokenSequence(tokens)
}

proptest! {
    #[test]
    fn metric_outputs_stay_in_range(h in token_vec(24), r in token_vec(24)) {
        let hs = seq(h);
        let rs = seq(r);
        let b = bleu(std::slice::from_ref(&hs), std::slice::from_ref(&rs), 4).unwrap();
        prop_assert!((0.0..=100.0).contains(&b));
        let sb = sentence_bleu(&hs, &rs, 4);
        prop_assert!((0.0..=100.0).contains(&sb));
        let m = meteor(&hs, &rs).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
        for score in [rouge_1(&hs, &rs).unwrap(), rouge_l(&hs, &rs).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&score.precision));
            prop_assert!((0.0..=1.0).contains(&score.recall));
            prop_assert!((0.0..=1.0).contains(&score.f1));
        }
    }

    #[test]
    fn rouge_precision_recall_swap_symmetry(h in token_vec(20), r in token_vec(20)) {
        let hs = seq(h);
        let rs = seq(r);
        let forward = rouge_1(&hs, &rs).unwrap();
        let backward = rouge_1(&rs, &hs).unwrap();
        prop_assert!((forward.precision - backward.recall).abs() < 1e-12);
        prop_assert!((forward.recall - backward.precision).abs() < 1e-12);

        let forward_l = rouge_l(&hs, &rs).unwrap();
        let backward_l = rouge_l(&rs, &hs).unwrap();
        prop_assert!((forward_l.precision - backward_l.recall).abs() < 1e-12);
    }

    #[test]
    fn brevity_penalty_never_rewards_shorter_prefixes(
        ref_len in 6usize..24,
        cut in 1usize..18,
    ) {
        // Perfectly matching prefixes isolate the brevity penalty.
        let reference: Vec<String> = (0..ref_len).map(|i| format!("t{i}")).collect();
        let longer = ref_len - 1;
        let shorter = longer.saturating_sub(cut).max(4);
        prop_assume!(shorter < longer);
        let score_short = sentence_bleu(&seq(reference[..shorter].to_vec()), &seq(reference.clone()), 4);
        let score_long = sentence_bleu(&seq(reference[..longer].to_vec()), &seq(reference.clone()), 4);
        prop_assert!(score_short <= score_long + 1e-12);
    }

    #[test]
    fn tokenizer_yields_lowercase_nonempty_tokens(text in ".{0,120}") {
        let tokens = tokenize(&text);
        for token in tokens.tokens() {
            prop_assert!(!token.is_empty());
            prop_assert!(!token.chars().any(|c| c.is_ascii_uppercase()));
            prop_assert!(!token.chars().any(char::is_whitespace));
        }
        // Re-tokenizing the joined tokens is a fixed point.
        let joined = tokens.tokens().join(" ");
        prop_assert_eq!(tokenize(&joined), tokens);
    }

    #[test]
    fn pearson_invariant_under_positive_affine_maps(
        xs in prop::collection::vec(-50.0f64..50.0, 3..12),
        scale in 0.1f64..40.0,
        shift in -30.0f64..30.0,
    ) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.5 + (i as f64) * 1.5).collect();
        prop_assume!(pearson(&xs, &ys).is_ok());
        let mapped: Vec<f64> = xs.iter().map(|x| x * scale + shift).collect();
        let base = pearson(&xs, &ys).unwrap();
        let transformed = pearson(&mapped, &ys).unwrap();
        prop_assert!((base - transformed).abs() < 1e-12);
    }

    #[test]
    fn averaging_matches_hand_mean(values in prop::collection::vec(0.0f64..100.0, 1..6)) {
        let reports: Vec<MetricReport> = values
            .iter()
            .map(|&v| MetricReport {
                per_sample: vec![SampleScore {
                    user_id: "u".into(),
                    item_id: "i".into(),
                    bleu: v,
                    meteor: v / 100.0,
                    rouge1_f: v / 200.0,
                    rouge_l_f: v / 400.0,
                }],
                corpus: CorpusScores { bleu: v, meteor: v / 100.0, rouge1_f: v / 200.0, rouge_l_f: v / 400.0 },
                n_samples: 1,
            })
            .collect();
        let averaged = average_reports(&reports).unwrap();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        prop_assert!((averaged.corpus.bleu - mean).abs() < 1e-9);
        prop_assert!((averaged.per_sample[0].bleu - mean).abs() < 1e-9);
    }

    #[test]
    fn seed_hint_never_changes_the_canonical_hash(
        content in "[a-z ]{1,40}",
        hint in prop::option::of(any::<i64>()),
    ) {
        let base = ChatRequest {
            model_id: "m".into(),
            messages: vec![ChatMessage::user(content)],
            temperature: 0.7,
            max_tokens: 32,
            seed_hint: None,
        };
        let mut hinted = base.clone();
        hinted.seed_hint = hint;
        prop_assert_eq!(canonical_request_hash(&base), canonical_request_hash(&hinted));
    }
}

/// Cache idempotence: over any request sequence, provider calls equal the
/// number of distinct canonical hashes.
#[test]
fn cache_calls_equal_distinct_hashes() {
    let fixture_dir = tempfile::tempdir().unwrap();
    let cache_dir = tempfile::tempdir().unwrap();
    let gateway = Gateway::new(Some(cache_dir.path().to_path_buf()), 2).unwrap();
    let spec = ProviderSpec::mock("m", fixture_dir.path());

    // A sequence with heavy duplication across content and temperature.
    let mut requests = Vec::new();
    for content in ["alpha", "beta", "gamma"] {
        for &temperature in &[0.0, 0.8, 0.0, 0.8, 0.0] {
            requests.push(ChatRequest {
                model_id: "m".into(),
                messages: vec![ChatMessage::user(content)],
                temperature,
                max_tokens: 16,
                seed_hint: None,
            });
        }
    }
    let distinct: BTreeSet<String> = requests.iter().map(canonical_request_hash).collect();
    for request in &requests {
        let digest = canonical_request_hash(request);
        let body = serde_json::json!({ "content": format!("echo {digest}") }).to_string();
        std::fs::write(fixture_dir.path().join(format!("{digest}.json")), body).unwrap();
    }

    for request in &requests {
        gateway.cached_complete(request, &spec).unwrap();
    }
    let stats = gateway.stats();
    assert_eq!(stats.provider_calls, distinct.len() as u64);
    assert_eq!(stats.cache_hits, (requests.len() - distinct.len()) as u64);

    // Distinct temperatures produced distinct entries: 3 contents x 2 temps.
    assert_eq!(distinct.len(), 6);
}

/// Deleting the cache directory between calls turns hits back into misses.
#[test]
fn deleted_cache_dir_forces_provider_call() {
    let fixture_dir = tempfile::tempdir().unwrap();
    let cache_root = tempfile::tempdir().unwrap();
    let cache_dir = cache_root.path().join("cache");
    let gateway = Gateway::new(Some(cache_dir.clone()), 1).unwrap();
    let spec = ProviderSpec::mock("m", fixture_dir.path());

    let request = ChatRequest {
        model_id: "m".into(),
        messages: vec![ChatMessage::user("hello cache")],
        temperature: 0.0,
        max_tokens: 8,
        seed_hint: None,
    };
    let digest = canonical_request_hash(&request);
    std::fs::write(
        fixture_dir.path().join(format!("{digest}.json")),
        serde_json::json!({ "content": "served" }).to_string(),
    )
    .unwrap();

    assert!(!gateway.cached_complete(&request, &spec).unwrap().cached);
    assert!(gateway.cached_complete(&request, &spec).unwrap().cached);

    std::fs::remove_dir_all(&cache_dir).unwrap();
    std::fs::create_dir_all(&cache_dir).unwrap();
    let third = gateway.cached_complete(&request, &spec).unwrap();
    assert!(!third.cached, "deleted cache must miss");
    assert_eq!(gateway.stats().provider_calls, 2);
}
