//! Canonical tokenizer shared by every metric.
//!
//! Rules (normative for all scores produced by this crate): Unicode-aware
//! lowercasing, split on Unicode whitespace, strip leading/trailing
//! punctuation from each token, keep intra-token apostrophes and hyphens,
//! drop tokens that end up empty.

use serde::{Deserialize, Serialize};

/// A tokenized text: ordered lowercase word tokens, none empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(pub Vec<String>);

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    /// Borrow tokens as `&str` slices, the shape the scorers consume.
    pub fn as_strs(&self) -> Vec<&str> {
        self.0.iter().map(String::as_str).collect()
    }
}

impl From<Vec<&str>> for TokenSequence {
    fn from(tokens: Vec<&str>) -> Self {
        TokenSequence(tokens.into_iter().map(str::to_string).collect())
    }
}

/// Punctuation predicate used for edge stripping.
///
/// Covers ASCII punctuation plus the punctuation ranges that show up in
/// review text: Latin-1 punctuation, general punctuation (curly quotes,
/// dashes, ellipsis), CJK punctuation and fullwidth forms.
fn is_strippable_punct(c: char) -> bool {
    if c.is_ascii_punctuation() {
        return true;
    }
    matches!(c,
        '\u{A1}' | '\u{A7}' | '\u{AB}' | '\u{B6}' | '\u{B7}' | '\u{BB}' | '\u{BF}'
        | '\u{2010}'..='\u{2027}'
        | '\u{2030}'..='\u{205E}'
        | '\u{3001}'..='\u{3003}'
        | '\u{3008}'..='\u{3011}'
        | '\u{3014}'..='\u{301F}'
        | '\u{FF01}'..='\u{FF0F}'
        | '\u{FF1A}'..='\u{FF1F}'
        | '\u{FF3B}'..='\u{FF40}'
        | '\u{FF5B}'..='\u{FF65}'
    )
}

/// Tokenize a text by the canonical rules.
pub fn tokenize(text: &str) -> TokenSequence {
    let lowered = text.to_lowercase();
    let tokens = lowered
        .split_whitespace()
        .filter_map(|raw| {
            let trimmed = raw.trim_matches(is_strippable_punct);
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_string())
            }
        })
        .collect();
    TokenSequence(tokens)
}
