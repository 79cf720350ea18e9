//! Prompt templates and pure request builders.
//!
//! Templates are versioned artifacts: the defaults are embedded from
//! `prompts/` and a whole set can be swapped via config or loaded from a
//! directory. Builders are pure functions of their inputs, which is what
//! makes mock fixture generation and prompt-content assertions possible.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::ReviewSample;
use crate::gateway::{ChatMessage, ChatRequest, ProviderSpec};
use crate::pipeline::{
    DifferenceFeature, DifferenceReport, Direction, UserDifferenceSummary, ValidatedReport,
};
use crate::retrieve::RetrievedHistory;

/// All templates used by the pipeline roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptSet {
    pub extractor_system: String,
    pub extractor_user: String,
    pub validator_system: String,
    pub validator_user: String,
    pub summarizer_system: String,
    pub summarizer_user: String,
    pub generator_system: String,
    pub generator_drp_user: String,
    pub generator_rag_user: String,
    pub generator_non_p_user: String,
    pub judge_system: String,
    pub judge_user: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            extractor_system: include_str!("../../prompts/extractor.system.txt").into(),
            extractor_user: include_str!("../../prompts/extractor.user.txt").into(),
            validator_system: include_str!("../../prompts/validator.system.txt").into(),
            validator_user: include_str!("../../prompts/validator.user.txt").into(),
            summarizer_system: include_str!("../../prompts/summarizer.system.txt").into(),
            summarizer_user: include_str!("../../prompts/summarizer.user.txt").into(),
            generator_system: include_str!("../../prompts/generator.system.txt").into(),
            generator_drp_user: include_str!("../../prompts/generator_drp.user.txt").into(),
            generator_rag_user: include_str!("../../prompts/generator_rag.user.txt").into(),
            generator_non_p_user: include_str!("../../prompts/generator_non_p.user.txt").into(),
            judge_system: include_str!("../../prompts/judge.system.txt").into(),
            judge_user: include_str!("../../prompts/judge.user.txt").into(),
        }
    }
}

impl PromptSet {
    /// Load a set from a directory of `<name>.txt` files, falling back to
    /// the embedded default for any missing file.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut set = PromptSet::default();
        let load = |name: &str, slot: &mut String| -> std::io::Result<()> {
            let path = dir.join(name);
            if path.is_file() {
                *slot = std::fs::read_to_string(path)?;
            }
            Ok(())
        };
        load("extractor.system.txt", &mut set.extractor_system)?;
        load("extractor.user.txt", &mut set.extractor_user)?;
        load("validator.system.txt", &mut set.validator_system)?;
        load("validator.user.txt", &mut set.validator_user)?;
        load("summarizer.system.txt", &mut set.summarizer_system)?;
        load("summarizer.user.txt", &mut set.summarizer_user)?;
        load("generator.system.txt", &mut set.generator_system)?;
        load("generator_drp.user.txt", &mut set.generator_drp_user)?;
        load("generator_rag.user.txt", &mut set.generator_rag_user)?;
        load("generator_non_p.user.txt", &mut set.generator_non_p_user)?;
        load("judge.system.txt", &mut set.judge_system)?;
        load("judge.user.txt", &mut set.judge_user)?;
        Ok(set)
    }
}

/// Replace `{name}` placeholders.
/// Replace `{name}` placeholders in a single pass over the template, so
/// placeholder-looking text inside substituted values is never expanded.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                match slots.iter().find(|(slot, _)| *slot == name) {
                    Some((_, value)) => out.push_str(value),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Numbered list of the retrieved review texts.
pub fn history_block(ctx: &RetrievedHistory) -> String {
    ctx.entries
        .iter()
        .enumerate()
        .map(|(i, (sample, _))| format!("{}. {}", i + 1, sample.review_text))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn item_block(item: &ReviewSample) -> String {
    if item.item_description.trim().is_empty() {
        format!("Title: {}", item.item_title)
    } else {
        format!(
            "Title: {}\nDescription: {}",
            item.item_title, item.item_description
        )
    }
}

fn direction_label(direction: Direction) -> &'static str {
    match direction {
        Direction::TargetHigher => "target_higher",
        Direction::TargetLower => "target_lower",
        Direction::Qualitative => "qualitative",
    }
}

/// One-line rendering of a feature, used in validator/summarizer/judge prompts.
pub fn feature_line(feature: &DifferenceFeature) -> String {
    format!(
        "[{}] {} ({})",
        feature.dimension.name,
        feature.description,
        direction_label(feature.direction)
    )
}

fn features_block(features: &[DifferenceFeature]) -> String {
    features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            format!(
                "FEATURE {i}\nDIMENSION: {}\nDEFINITION: {}\nDESCRIPTION: {}\nDIRECTION: {}",
                f.dimension.name,
                f.dimension.definition,
                f.description,
                direction_label(f.direction)
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn validated_block(validated: &[ValidatedReport]) -> String {
    validated
        .iter()
        .map(|report| {
            let header = format!(
                "### versus comparison user {}",
                report.source.representative_user
            );
            let body = if report.kept.is_empty() {
                "(no validated differences)".to_string()
            } else {
                report
                    .kept
                    .iter()
                    .map(|f| format!("- {}", feature_line(f)))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            format!("{header}\n{body}")
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn chat(
    spec: &ProviderSpec,
    system: String,
    user: String,
    temperature: f64,
    max_tokens: u32,
) -> ChatRequest {
    ChatRequest {
        model_id: spec.model_id.clone(),
        messages: vec![ChatMessage::system(system), ChatMessage::user(user)],
        temperature,
        max_tokens,
        seed_hint: None,
    }
}

pub fn build_extract_request(
    prompts: &PromptSet,
    spec: &ProviderSpec,
    target_ctx: &RetrievedHistory,
    rep_ctx: &RetrievedHistory,
    temperature: f64,
    max_tokens: u32,
) -> ChatRequest {
    let user = fill(
        &prompts.extractor_user,
        &[
            ("target_history", &history_block(target_ctx)),
            ("representative_history", &history_block(rep_ctx)),
        ],
    );
    chat(
        spec,
        prompts.extractor_system.clone(),
        user,
        temperature,
        max_tokens,
    )
}

pub fn build_validate_request(
    prompts: &PromptSet,
    spec: &ProviderSpec,
    report: &DifferenceReport,
    temperature: f64,
    max_tokens: u32,
) -> ChatRequest {
    let user = fill(
        &prompts.validator_user,
        &[("features", &features_block(&report.features))],
    );
    chat(
        spec,
        prompts.validator_system.clone(),
        user,
        temperature,
        max_tokens,
    )
}

pub fn build_summarize_request(
    prompts: &PromptSet,
    spec: &ProviderSpec,
    target_ctx: &RetrievedHistory,
    validated: &[ValidatedReport],
    temperature: f64,
    max_tokens: u32,
) -> ChatRequest {
    let user = fill(
        &prompts.summarizer_user,
        &[
            ("target_history", &history_block(target_ctx)),
            ("validated_features", &validated_block(validated)),
        ],
    );
    chat(
        spec,
        prompts.summarizer_system.clone(),
        user,
        temperature,
        max_tokens,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn build_generate_request(
    prompts: &PromptSet,
    spec: &ProviderSpec,
    mode: crate::pipeline::Mode,
    item: &ReviewSample,
    target_ctx: &RetrievedHistory,
    summary: Option<&UserDifferenceSummary>,
    temperature: f64,
    max_tokens: u32,
) -> ChatRequest {
    use crate::pipeline::Mode;
    let item_text = item_block(item);
    let user = match mode {
        Mode::NonP => fill(&prompts.generator_non_p_user, &[("item", &item_text)]),
        Mode::Rag => fill(
            &prompts.generator_rag_user,
            &[
                ("item", &item_text),
                ("target_history", &history_block(target_ctx)),
            ],
        ),
        Mode::Drp => {
            let summary_text = summary.map(|s| s.text.as_str()).unwrap_or("");
            fill(
                &prompts.generator_drp_user,
                &[
                    ("item", &item_text),
                    ("target_history", &history_block(target_ctx)),
                    ("summary", summary_text),
                ],
            )
        }
    };
    chat(
        spec,
        prompts.generator_system.clone(),
        user,
        temperature,
        max_tokens,
    )
}

pub fn build_judge_request(
    prompts: &PromptSet,
    spec: &ProviderSpec,
    feature: &DifferenceFeature,
    siblings: &[DifferenceFeature],
    max_tokens: u32,
) -> ChatRequest {
    let sibling_block = if siblings.is_empty() {
        "(none)".to_string()
    } else {
        siblings
            .iter()
            .map(|f| format!("- {}", feature_line(f)))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let user = fill(
        &prompts.judge_user,
        &[
            ("feature", &feature_line(feature)),
            ("siblings", &sibling_block),
        ],
    );
    // Judging runs at temperature 0: verdicts should not wobble.
    chat(spec, prompts.judge_system.clone(), user, 0.0, max_tokens)
}
