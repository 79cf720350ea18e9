//! Mock fixture generation.
//!
//! Builds every chat request the pipeline (and the UVQ judge) will issue
//! for a given corpus + config — using the same pure prompt builders the
//! pipeline uses — and writes a canned response for each, keyed by the
//! canonical request digest. A run against the generated fixture set is
//! fully offline and deterministic; any drift between the pipeline's
//! request construction and this module surfaces as a fixture miss.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::json;

use crate::corpus::{Corpus, ReviewSample};
use crate::gateway::{canonical_request_hash, split_reasoning, ChatRequest, ProviderKind};
use crate::pipeline::{
    item_query, parse_difference_output, prompts, run_step0, DifferenceFeature, DifferenceReport,
    Mode, PipelineError, RunConfig, UserDifferenceSummary, ValidatedReport,
};
use crate::retrieve::retrieve_key_history;
use crate::uvq::{canonical_dimension_name, judging_plan, FeatureCategory};

/// What was generated, per role directory.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct MockgenReport {
    pub extractor: usize,
    pub validator: usize,
    pub summarizer: usize,
    pub generator: usize,
    pub judge: usize,
}

impl MockgenReport {
    pub fn total(&self) -> usize {
        self.extractor + self.validator + self.summarizer + self.generator + self.judge
    }
}

fn write_fixture(dir: &Path, request: &ChatRequest, content: &str) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| super::io_err(dir, e))?;
    let digest = canonical_request_hash(request);
    let path = dir.join(format!("{digest}.json"));
    let body = json!({ "content": content }).to_string();
    std::fs::write(&path, body).map_err(|e| super::io_err(&path, e))
}

fn canned_extractor(target: &str, rep: &str, rep_index: usize) -> String {
    let (word, direction) = if rep_index.is_multiple_of(2) {
        ("more", "target_higher")
    } else {
        ("less", "target_lower")
    };
    format!(
        "<think>Compared review length, tone, and focus between {target} and {rep}.</think>\n\
[FEATURE]\n\
DIMENSION: Verbosity\n\
DEFINITION: How much detail a review includes.\n\
DESCRIPTION: {target} writes longer, more detailed reviews than {rep}.\n\
DIRECTION: target_higher\n\
[/FEATURE]\n\
[FEATURE]\n\
DIMENSION: Enthusiasm\n\
DEFINITION: How excited the review sounds.\n\
DESCRIPTION: {target} sounds {word} enthusiastic than {rep}.\n\
DIRECTION: {direction}\n\
[/FEATURE]"
    )
}

fn canned_verdicts(n_features: usize) -> String {
    (0..n_features)
        .map(|i| format!("VERDICT {i}: KEEP — consistent with both histories"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn canned_summary(target: &str) -> String {
    format!(
        "{target} writes longer and more detailed reviews than comparable users, \
while their enthusiasm is higher than some peers and lower than others."
    )
}

fn canned_review(target: &str, item: &ReviewSample) -> String {
    format!(
        "Having spent real time with {title}, I can say it earns its place on my shelf. \
The details matter to me and {title} gets most of them right, though {user} standards are hard to meet fully.",
        title = item.item_title,
        user = target,
    )
}

fn canned_judge(feature: &DifferenceFeature) -> String {
    let name = canonical_dimension_name(&feature.dimension.name);
    let category = match name.as_str() {
        "verbosity" => FeatureCategory::Writing,
        "enthusiasm" => FeatureCategory::Emotion,
        _ => {
            let mut hash = 0usize;
            for b in name.bytes() {
                hash = hash.wrapping_mul(31).wrapping_add(b as usize);
            }
            FeatureCategory::ALL[hash % FeatureCategory::ALL.len()]
        }
    };
    format!("COMPARATIVE: YES\nATOMIC: YES\nCLEAR: YES\nCATEGORY: {category}\nCONSISTENT: YES")
}

fn mock_dir<'a>(
    spec: &'a crate::gateway::ProviderSpec,
    role: &str,
) -> Result<&'a Path, PipelineError> {
    if spec.kind != ProviderKind::Mock {
        return Err(PipelineError::Config(format!(
            "{role} provider must be mock for mockgen"
        )));
    }
    spec.fixture_dir
        .as_deref()
        .ok_or_else(|| PipelineError::Config(format!("{role} mock provider has no fixture_dir")))
}

/// Generate the full fixture set for `corpus` under the fixture dirs named
/// in `cfg.roles`. All five roles must be mock providers.
pub fn generate_fixtures(corpus: &Corpus, cfg: &RunConfig) -> Result<MockgenReport, PipelineError> {
    cfg.validate()?;
    let extractor_dir = mock_dir(&cfg.roles.extractor, "extractor")?.to_path_buf();
    let validator_dir = mock_dir(&cfg.roles.validator, "validator")?.to_path_buf();
    let summarizer_dir = mock_dir(&cfg.roles.summarizer, "summarizer")?.to_path_buf();
    let generator_dir = mock_dir(&cfg.roles.generator, "generator")?.to_path_buf();
    let judge_dir = mock_dir(&cfg.roles.judge, "judge")?.to_path_buf();

    let provider = cfg.embedding.provider();
    let step0 = if cfg.mode == Mode::Drp {
        Some(run_step0(corpus, cfg, provider.as_ref())?)
    } else {
        None
    };

    let mut test: Vec<&ReviewSample> = corpus.test.iter().collect();
    test.sort_by(|a, b| (&a.user_id, &a.item_id).cmp(&(&b.user_id, &b.item_id)));

    let mut report = MockgenReport::default();
    for &temperature in &cfg.temperatures {
        // Kept features per user, in the exact order the uvq command will
        // collect them from the report bundle.
        let mut kept_by_user: BTreeMap<String, Vec<DifferenceFeature>> = BTreeMap::new();

        for sample in &test {
            let history = corpus.user_history(&sample.user_id)?;
            let query = item_query(sample);
            let target_ctx = retrieve_key_history(
                &history,
                &query,
                cfg.retrieval_k,
                cfg.retrieval_mode,
                provider.as_ref(),
            )?;

            let mut summary = None;
            if let Some(step0) = &step0 {
                let reps = &step0.representatives[&sample.user_id];
                let mut validated = Vec::new();
                for (rep_index, rep_user) in reps.members.iter().enumerate() {
                    let rep_history = corpus.user_history(rep_user)?;
                    let rep_ctx = retrieve_key_history(
                        &rep_history,
                        &query,
                        cfg.retrieval_k,
                        cfg.retrieval_mode,
                        provider.as_ref(),
                    )?;

                    let extract_request = prompts::build_extract_request(
                        &cfg.prompts,
                        &cfg.roles.extractor,
                        &target_ctx,
                        &rep_ctx,
                        temperature,
                        cfg.max_tokens,
                    );
                    let extractor_raw = canned_extractor(&sample.user_id, rep_user, rep_index);
                    write_fixture(&extractor_dir, &extract_request, &extractor_raw)?;
                    report.extractor += 1;

                    let (content, _) = split_reasoning(&extractor_raw);
                    let features = parse_difference_output(&content)?;
                    let diff_report = DifferenceReport {
                        target_user: sample.user_id.clone(),
                        representative_user: rep_user.clone(),
                        features: features.clone(),
                        raw_output: content,
                        reasoning_trace: None,
                        extractor_model: cfg.roles.extractor.model_id.clone(),
                        temperature,
                    };

                    let validate_request = prompts::build_validate_request(
                        &cfg.prompts,
                        &cfg.roles.validator,
                        &diff_report,
                        temperature,
                        cfg.max_tokens,
                    );
                    write_fixture(
                        &validator_dir,
                        &validate_request,
                        &canned_verdicts(features.len()),
                    )?;
                    report.validator += 1;

                    kept_by_user
                        .entry(sample.user_id.clone())
                        .or_default()
                        .extend(features.iter().cloned());
                    validated.push(ValidatedReport {
                        source: diff_report,
                        kept: features,
                        dropped: Vec::new(),
                        validator_model: cfg.roles.validator.model_id.clone(),
                    });
                }

                let summarize_request = prompts::build_summarize_request(
                    &cfg.prompts,
                    &cfg.roles.summarizer,
                    &target_ctx,
                    &validated,
                    temperature,
                    cfg.max_tokens,
                );
                let summary_text = canned_summary(&sample.user_id);
                write_fixture(&summarizer_dir, &summarize_request, &summary_text)?;
                report.summarizer += 1;

                summary = Some(UserDifferenceSummary {
                    target_user: sample.user_id.clone(),
                    text: summary_text,
                    source_report_count: validated.len(),
                });
            }

            let generate_request = prompts::build_generate_request(
                &cfg.prompts,
                &cfg.roles.generator,
                cfg.mode,
                sample,
                &target_ctx,
                summary.as_ref(),
                temperature,
                cfg.max_tokens,
            );
            write_fixture(
                &generator_dir,
                &generate_request,
                &canned_review(&sample.user_id, sample),
            )?;
            report.generator += 1;
        }

        for features in kept_by_user.values() {
            for (index, siblings) in judging_plan(features) {
                let judge_request = prompts::build_judge_request(
                    &cfg.prompts,
                    &cfg.roles.judge,
                    &features[index],
                    &siblings,
                    cfg.max_tokens,
                );
                write_fixture(&judge_dir, &judge_request, &canned_judge(&features[index]))?;
                report.judge += 1;
            }
        }
    }

    Ok(report)
}
