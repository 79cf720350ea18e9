//! Parsers for the extraction block grammar and validator verdict lines.

use crate::pipeline::{DifferenceDimension, DifferenceFeature, Direction, PipelineError};

const MAX_DIMENSION_NAME: usize = 64;

/// Parse `[FEATURE]…[/FEATURE]` blocks out of raw model output.
///
/// Tolerant of surrounding prose and of unknown DIRECTION tokens (which
/// fall back to `qualitative`); blocks missing DIMENSION, DEFINITION or
/// DESCRIPTION are skipped. Zero valid blocks is an error that preserves
/// the raw output.
pub fn parse_difference_output(raw: &str) -> Result<Vec<DifferenceFeature>, PipelineError> {
    let mut features = Vec::new();
    let mut block: Option<Vec<&str>> = None;
    for line in raw.lines() {
        let trimmed = line.trim();
        if trimmed.eq_ignore_ascii_case("[FEATURE]") {
            block = Some(Vec::new());
        } else if trimmed.eq_ignore_ascii_case("[/FEATURE]") {
            if let Some(lines) = block.take() {
                if let Some(feature) = parse_block(&lines) {
                    features.push(feature);
                }
            }
        } else if let Some(lines) = block.as_mut() {
            lines.push(trimmed);
        }
    }
    if features.is_empty() {
        return Err(PipelineError::ExtractionParse {
            raw_output: raw.to_string(),
            reason: "no valid [FEATURE] blocks".into(),
        });
    }
    Ok(features)
}

fn field<'a>(lines: &[&'a str], key: &str) -> Option<&'a str> {
    lines.iter().find_map(|line| {
        let rest = strip_prefix_ci(line, key)?;
        let value = rest.strip_prefix(':')?.trim();
        if value.is_empty() {
            None
        } else {
            Some(value)
        }
    })
}

fn truncate_chars(s: &str, max: usize) -> String {
    s.chars().take(max).collect()
}

fn parse_block(lines: &[&str]) -> Option<DifferenceFeature> {
    let name = field(lines, "DIMENSION")?;
    let definition = field(lines, "DEFINITION")?;
    let description = field(lines, "DESCRIPTION")?;
    let direction = match field(lines, "DIRECTION")
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("target_higher") => Direction::TargetHigher,
        Some("target_lower") => Direction::TargetLower,
        _ => Direction::Qualitative,
    };
    Some(DifferenceFeature {
        dimension: DifferenceDimension {
            name: truncate_chars(name, MAX_DIMENSION_NAME),
            definition: definition.to_string(),
        },
        description: description.to_string(),
        direction,
        evidence: field(lines, "EVIDENCE").map(str::to_string),
    })
}

/// One parsed verdict line: (feature index, keep, reason).
pub type Verdict = (usize, bool, String);

/// Parse `VERDICT <index>: KEEP|DROP — <reason>` lines.
///
/// Accepts em/en dashes or a plain hyphen before the reason, ignores
/// out-of-range indices, keeps the first verdict per index. Zero
/// parseable lines is an error.
pub fn parse_verdicts(raw: &str, n_features: usize) -> Result<Vec<Verdict>, PipelineError> {
    let mut verdicts: Vec<Verdict> = Vec::new();
    for line in raw.lines() {
        let trimmed = line.trim();
        let Some(rest) = strip_prefix_ci(trimmed, "VERDICT") else {
            continue;
        };
        let Some((index_part, tail)) = rest.split_once(':') else {
            continue;
        };
        let Ok(index) = index_part.trim().parse::<usize>() else {
            continue;
        };
        let tail = tail.trim_start();
        let keep = if strip_prefix_ci(tail, "KEEP").is_some() {
            true
        } else if strip_prefix_ci(tail, "DROP").is_some() {
            false
        } else {
            continue;
        };
        let reason = tail[4..]
            .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '—' | '–' | '-' | ':'))
            .trim()
            .to_string();
        if index >= n_features || verdicts.iter().any(|v| v.0 == index) {
            continue;
        }
        verdicts.push((index, keep, reason));
    }
    if verdicts.is_empty() {
        return Err(PipelineError::ValidationParse {
            raw_output: raw.to_string(),
            reason: "no parseable VERDICT lines".into(),
        });
    }
    Ok(verdicts)
}

/// Case-insensitive ASCII prefix strip. Compares bytes, so a multibyte
/// character straddling the prefix length can never cause a slice panic:
/// matching bytes are all ASCII, making the boundary valid.
fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    debug_assert!(prefix.is_ascii());
    let bytes = s.as_bytes();
    let prefix_bytes = prefix.as_bytes();
    if bytes.len() >= prefix_bytes.len()
        && bytes[..prefix_bytes.len()].eq_ignore_ascii_case(prefix_bytes)
    {
        Some(&s[prefix_bytes.len()..])
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_BLOCK: &str = "\
Some preamble the model wrote.
[FEATURE]
DIMENSION: Verbosity
DEFINITION: How much detail a review includes.
DESCRIPTION: Target writes far longer reviews.
DIRECTION: target_higher
[/FEATURE]
Trailing prose.";

    #[test]
    fn parses_single_block() {
        let features = parse_difference_output(ONE_BLOCK).unwrap();
        assert_eq!(features.len(), 1);
        assert_eq!(features[0].dimension.name, "Verbosity");
        assert_eq!(features[0].direction, Direction::TargetHigher);
        assert!(features[0].evidence.is_none());
    }

    #[test]
    fn unknown_direction_falls_back_to_qualitative() {
        let raw = ONE_BLOCK.replace("target_higher", "sideways");
        let features = parse_difference_output(&raw).unwrap();
        assert_eq!(features[0].direction, Direction::Qualitative);
    }

    #[test]
    fn block_missing_description_is_skipped() {
        let raw = "\
[FEATURE]
DIMENSION: A
DEFINITION: def a.
DESCRIPTION: desc a.
DIRECTION: target_lower
[/FEATURE]
[FEATURE]
DIMENSION: B
DEFINITION: def b.
DIRECTION: target_higher
[/FEATURE]
[FEATURE]
DIMENSION: C
DEFINITION: def c.
DESCRIPTION: desc c.
DIRECTION: qualitative
[/FEATURE]";
        let features = parse_difference_output(raw).unwrap();
        assert_eq!(features.len(), 2);
        assert_eq!(features[0].dimension.name, "A");
        assert_eq!(features[1].dimension.name, "C");
    }

    #[test]
    fn prose_only_output_is_an_error() {
        match parse_difference_output("no blocks here at all") {
            Err(PipelineError::ExtractionParse { raw_output, .. }) => {
                assert!(raw_output.contains("no blocks"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn long_dimension_names_are_truncated() {
        let long = "X".repeat(100);
        let raw = ONE_BLOCK.replace("Verbosity", &long);
        let features = parse_difference_output(&raw).unwrap();
        assert_eq!(features[0].dimension.name.chars().count(), 64);
    }

    #[test]
    fn evidence_is_captured() {
        let raw = ONE_BLOCK.replace(
            "DIRECTION: target_higher",
            "DIRECTION: target_higher\nEVIDENCE: \"so much detail\"",
        );
        let features = parse_difference_output(&raw).unwrap();
        assert_eq!(features[0].evidence.as_deref(), Some("\"so much detail\""));
    }

    #[test]
    fn parses_verdict_lines() {
        let raw = "VERDICT 0: KEEP — grounded in both histories\nVERDICT 1: DROP - vague";
        let verdicts = parse_verdicts(raw, 2).unwrap();
        assert_eq!(verdicts.len(), 2);
        assert_eq!(
            verdicts[0],
            (0, true, "grounded in both histories".to_string())
        );
        assert_eq!(verdicts[1], (1, false, "vague".to_string()));
    }

    #[test]
    fn out_of_range_and_duplicate_indices_ignored() {
        let raw = "VERDICT 0: KEEP — ok\nVERDICT 0: DROP — flip\nVERDICT 9: DROP — n/a";
        let verdicts = parse_verdicts(raw, 2).unwrap();
        assert_eq!(verdicts, vec![(0, true, "ok".to_string())]);
    }

    #[test]
    fn verdictless_text_is_an_error() {
        assert!(matches!(
            parse_verdicts("the features look fine to me", 2),
            Err(PipelineError::ValidationParse { .. })
        ));
    }

    #[test]
    fn multibyte_output_never_panics() {
        // Accented or otherwise non-ASCII lines must be skipped, not
        // split at an invalid byte boundary.
        let raw = "\
[FEATURE]
DIMENSIÓN: Tono
DIMENSION: Tone
DEFINITIÓN: ñ
DEFINITION: Emotional register.
DESCRIPTION: El target es más efusivo — “¡mucho!”
DIRECTION: qualitative
[/FEATURE]";
        let features = parse_difference_output(raw).unwrap();
        assert_eq!(features[0].dimension.name, "Tone");
        assert_eq!(features[0].dimension.definition, "Emotional register.");

        let verdicts = parse_verdicts("VÉRDICT 0: KEEP — ño\nVERDICT 0: KEEP — «fine»", 1).unwrap();
        assert_eq!(verdicts, vec![(0, true, "«fine»".to_string())]);
    }
}
