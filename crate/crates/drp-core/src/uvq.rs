//! Coverage and granularity analysis of extracted difference features:
//! LLM-judged validity, per-user dedup and directional-conflict removal,
//! the unique-valid-quantity (UVQ) aggregate, category proportions, and a
//! Pearson correlation helper.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, ProviderSpec};
use crate::metrics::tokenize;
use crate::pipeline::prompts::{build_judge_request, PromptSet};
use crate::pipeline::{DifferenceFeature, Direction, ReportRecord};

#[derive(Debug, Error)]
pub enum UvqError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("judge output unparseable: {0}")]
    JudgeParse(String),
    #[error("pearson needs >= 2 paired values with nonzero variance")]
    DegenerateInput,
}

/// The five posterior feature categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureCategory {
    Writing,
    Emotion,
    Semantics,
    Structure,
    Pragmatics,
}

impl FeatureCategory {
    pub const ALL: [FeatureCategory; 5] = [
        FeatureCategory::Writing,
        FeatureCategory::Emotion,
        FeatureCategory::Semantics,
        FeatureCategory::Structure,
        FeatureCategory::Pragmatics,
    ];

    pub fn parse(token: &str) -> Option<FeatureCategory> {
        match token {
            "Writing" => Some(FeatureCategory::Writing),
            "Emotion" => Some(FeatureCategory::Emotion),
            "Semantics" => Some(FeatureCategory::Semantics),
            "Structure" => Some(FeatureCategory::Structure),
            "Pragmatics" => Some(FeatureCategory::Pragmatics),
            _ => None,
        }
    }
}

impl std::fmt::Display for FeatureCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            FeatureCategory::Writing => "Writing",
            FeatureCategory::Emotion => "Emotion",
            FeatureCategory::Semantics => "Semantics",
            FeatureCategory::Structure => "Structure",
            FeatureCategory::Pragmatics => "Pragmatics",
        };
        write!(f, "{name}")
    }
}

/// The judge's five-criterion answer for one feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityVerdict {
    pub comparative: bool,
    pub atomic: bool,
    pub clear: bool,
    pub categorized: bool,
    pub category: Option<FeatureCategory>,
    pub consistent: bool,
}

impl ValidityVerdict {
    pub fn valid(&self) -> bool {
        self.comparative && self.atomic && self.clear && self.categorized && self.consistent
    }
}

/// Parse the five-line judge verdict grammar. Unknown category tokens and
/// missing lines are errors, never a silent pass.
pub fn parse_judge_verdict(raw: &str) -> Result<ValidityVerdict, UvqError> {
    let mut comparative = None;
    let mut atomic = None;
    let mut clear = None;
    let mut category: Option<Option<FeatureCategory>> = None;
    let mut consistent = None;
    for line in raw.lines() {
        let trimmed = line.trim();
        let Some((key, value)) = trimmed.split_once(':') else {
            continue;
        };
        let value = value.trim();
        let yes_no = |slot: &mut Option<bool>| -> Result<(), UvqError> {
            match value {
                "YES" => *slot = Some(true),
                "NO" => *slot = Some(false),
                other => {
                    return Err(UvqError::JudgeParse(format!(
                        "{key}: {other:?} is not YES|NO"
                    )))
                }
            }
            Ok(())
        };
        match key.trim() {
            "COMPARATIVE" => yes_no(&mut comparative)?,
            "ATOMIC" => yes_no(&mut atomic)?,
            "CLEAR" => yes_no(&mut clear)?,
            "CONSISTENT" => yes_no(&mut consistent)?,
            "CATEGORY" => {
                if value == "NONE" {
                    category = Some(None);
                } else if let Some(parsed) = FeatureCategory::parse(value) {
                    category = Some(Some(parsed));
                } else {
                    return Err(UvqError::JudgeParse(format!("unknown category {value:?}")));
                }
            }
            _ => {}
        }
    }
    match (comparative, atomic, clear, category, consistent) {
        (Some(comparative), Some(atomic), Some(clear), Some(category), Some(consistent)) => {
            Ok(ValidityVerdict {
                comparative,
                atomic,
                clear,
                categorized: category.is_some(),
                category,
                consistent,
            })
        }
        _ => Err(UvqError::JudgeParse("missing verdict line(s)".into())),
    }
}

/// Ask the judge role about one feature (one call). `siblings` are the
/// same-dimension features extracted for the same user, included so the
/// judge can assess directional consistency.
pub fn judge_feature(
    gateway: &Gateway,
    feature: &DifferenceFeature,
    siblings: &[DifferenceFeature],
    judge: &ProviderSpec,
    prompts: &PromptSet,
    max_tokens: u32,
) -> Result<ValidityVerdict, UvqError> {
    let request = build_judge_request(prompts, judge, feature, siblings, max_tokens);
    let response = gateway.cached_complete(&request, judge)?;
    parse_judge_verdict(&response.content)
}

/// Canonical dimension name: lowercased, edge punctuation stripped,
/// whitespace collapsed, tokens sorted.
pub fn canonical_dimension_name(name: &str) -> String {
    let mut tokens = tokenize(name).0;
    tokens.sort_unstable();
    tokens.join(" ")
}

/// Dedup identity of a valid feature.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureKey {
    pub category: FeatureCategory,
    pub name: String,
    pub direction: Direction,
}

/// Key for a feature with a valid verdict (the verdict supplies the
/// category; callers must check `verdict.valid()` first).
pub fn canonical_feature_key(feature: &DifferenceFeature, verdict: &ValidityVerdict) -> FeatureKey {
    FeatureKey {
        category: verdict.category.expect("valid verdict is categorized"),
        name: canonical_dimension_name(&feature.dimension.name),
        direction: feature.direction,
    }
}

/// Discard invalid features, collapse duplicates by canonical key, and
/// remove every feature of a (category, name) that occurs with both
/// `target_higher` and `target_lower`. Qualitative features never trigger
/// a conflict.
pub fn dedup_and_resolve(
    user_features: &[(DifferenceFeature, ValidityVerdict)],
) -> BTreeMap<FeatureKey, DifferenceFeature> {
    let valid: Vec<(FeatureKey, &DifferenceFeature)> = user_features
        .iter()
        .filter(|(_, verdict)| verdict.valid())
        .map(|(feature, verdict)| (canonical_feature_key(feature, verdict), feature))
        .collect();

    let mut directions: BTreeMap<(FeatureCategory, &str), BTreeSet<Direction>> = BTreeMap::new();
    for (key, _) in &valid {
        directions
            .entry((key.category, key.name.as_str()))
            .or_default()
            .insert(key.direction);
    }
    let conflicted: BTreeSet<(FeatureCategory, String)> = directions
        .iter()
        .filter(|(_, dirs)| {
            dirs.contains(&Direction::TargetHigher) && dirs.contains(&Direction::TargetLower)
        })
        .map(|((category, name), _)| (*category, name.to_string()))
        .collect();

    let mut unique: BTreeMap<FeatureKey, DifferenceFeature> = BTreeMap::new();
    for (key, feature) in valid {
        if conflicted.contains(&(key.category, key.name.clone())) {
            continue;
        }
        unique.entry(key).or_insert_with(|| feature.clone());
    }
    unique
}

/// How per-user unique counts aggregate to the dataset number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UvqAggregation {
    /// Sum of per-user unique valid counts (grows with user count).
    #[default]
    Sum,
    /// Count of distinct keys across all users, for sensitivity analysis.
    Union,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UvqReport {
    pub per_user: BTreeMap<String, usize>,
    pub dataset_uvq: usize,
    pub category_proportions: BTreeMap<FeatureCategory, f64>,
    /// Number of unique valid features entering the proportions.
    pub judged_total: usize,
    pub aggregation: UvqAggregation,
}

/// Aggregate per-user unique valid feature sets into the UVQ report.
pub fn compute_uvq(
    per_user_sets: &BTreeMap<String, BTreeMap<FeatureKey, DifferenceFeature>>,
    aggregation: UvqAggregation,
) -> UvqReport {
    let per_user: BTreeMap<String, usize> = per_user_sets
        .iter()
        .map(|(user, set)| (user.clone(), set.len()))
        .collect();

    let counted_keys: Vec<&FeatureKey> = match aggregation {
        UvqAggregation::Sum => per_user_sets.values().flat_map(|set| set.keys()).collect(),
        UvqAggregation::Union => {
            let distinct: BTreeSet<&FeatureKey> =
                per_user_sets.values().flat_map(|set| set.keys()).collect();
            distinct.into_iter().collect()
        }
    };
    let dataset_uvq = counted_keys.len();

    let mut category_counts: BTreeMap<FeatureCategory, usize> = BTreeMap::new();
    for key in &counted_keys {
        *category_counts.entry(key.category).or_insert(0) += 1;
    }
    let total = counted_keys.len();
    let category_proportions = category_counts
        .into_iter()
        .map(|(category, count)| (category, count as f64 / total as f64))
        .collect();

    UvqReport {
        per_user,
        dataset_uvq,
        category_proportions,
        judged_total: total,
        aggregation,
    }
}

/// Kept (validated) features grouped by target user, preserving bundle
/// order — the judging order contract shared with fixture generation.
pub fn kept_features_by_user(records: &[ReportRecord]) -> BTreeMap<String, Vec<DifferenceFeature>> {
    let mut by_user: BTreeMap<String, Vec<DifferenceFeature>> = BTreeMap::new();
    for record in records {
        by_user
            .entry(record.report.source.target_user.clone())
            .or_default()
            .extend(record.report.kept.iter().cloned());
    }
    by_user
}

/// Judge every kept feature of a report bundle and aggregate the unique
/// valid features into a [`UvqReport`]: one judge call per feature (with
/// its same-dimension siblings in the prompt), then per-user dedup and
/// directional-conflict removal.
pub fn judge_and_aggregate(
    gateway: &Gateway,
    records: &[ReportRecord],
    judge: &ProviderSpec,
    prompts: &PromptSet,
    max_tokens: u32,
    aggregation: UvqAggregation,
) -> Result<UvqReport, UvqError> {
    let mut per_user_sets = BTreeMap::new();
    for (user, features) in kept_features_by_user(records) {
        let mut judged = Vec::with_capacity(features.len());
        for (index, siblings) in judging_plan(&features) {
            let verdict = judge_feature(
                gateway,
                &features[index],
                &siblings,
                judge,
                prompts,
                max_tokens,
            )?;
            judged.push((features[index].clone(), verdict));
        }
        per_user_sets.insert(user, dedup_and_resolve(&judged));
    }
    Ok(compute_uvq(&per_user_sets, aggregation))
}

/// Judging plan for one user's kept features: for each feature index, the
/// same-dimension sibling features shown to the judge.
pub fn judging_plan(features: &[DifferenceFeature]) -> Vec<(usize, Vec<DifferenceFeature>)> {
    (0..features.len())
        .map(|i| {
            let name = canonical_dimension_name(&features[i].dimension.name);
            let siblings = features
                .iter()
                .enumerate()
                .filter(|(j, f)| *j != i && canonical_dimension_name(&f.dimension.name) == name)
                .map(|(_, f)| f.clone())
                .collect();
            (i, siblings)
        })
        .collect()
}

/// Standard Pearson product-moment correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, UvqError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(UvqError::DegenerateInput);
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(UvqError::DegenerateInput);
    }
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}
