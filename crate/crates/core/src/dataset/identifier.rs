//! Rare-token subject identifiers and caption rewriting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentifierError {
    #[error("rare token must be a single non-empty token without whitespace, got {0:?}")]
    BadRareToken(String),
    #[error("common tokens must not be empty")]
    EmptyCommonTokens,
    #[error("identifier must look like \"rare|common tokens\", got {0:?}")]
    BadSyntax(String),
    #[error("subject phrase {phrase:?} not found in caption {caption:?}")]
    SubjectPhraseNotFound { phrase: String, caption: String },
}

/// A rare token followed by descriptive common tokens, e.g. `sks` +
/// `mr. potato head`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawIdentifier", into = "RawIdentifier")]
pub struct UniqueIdentifier {
    rare_token: String,
    common_tokens: String,
}

#[derive(Serialize, Deserialize)]
struct RawIdentifier {
    rare_token: String,
    common_tokens: String,
}

impl TryFrom<RawIdentifier> for UniqueIdentifier {
    type Error = IdentifierError;
    fn try_from(raw: RawIdentifier) -> Result<Self, Self::Error> {
        UniqueIdentifier::new(raw.rare_token, raw.common_tokens)
    }
}

impl From<UniqueIdentifier> for RawIdentifier {
    fn from(id: UniqueIdentifier) -> Self {
        RawIdentifier { rare_token: id.rare_token, common_tokens: id.common_tokens }
    }
}

impl UniqueIdentifier {
    pub fn new(rare_token: impl Into<String>, common_tokens: impl Into<String>) -> Result<Self, IdentifierError> {
        let rare_token = rare_token.into();
        let common_tokens = common_tokens.into().trim().to_string();
        if rare_token.is_empty() || rare_token.chars().any(char::is_whitespace) {
            return Err(IdentifierError::BadRareToken(rare_token));
        }
        if common_tokens.is_empty() {
            return Err(IdentifierError::EmptyCommonTokens);
        }
        Ok(Self { rare_token, common_tokens })
    }

    pub fn rare_token(&self) -> &str {
        &self.rare_token
    }

    pub fn common_tokens(&self) -> &str {
        &self.common_tokens
    }

    pub fn full(&self) -> String {
        format!("{} {}", self.rare_token, self.common_tokens)
    }

    /// True if `caption` contains the rare token as a whitespace-separated
    /// word, ignoring surrounding punctuation.
    pub fn tagged_in(&self, caption: &str) -> bool {
        caption
            .split_whitespace()
            .any(|w| w == self.rare_token || w.trim_matches(|c: char| c.is_ascii_punctuation()) == self.rare_token)
    }
}

impl fmt::Display for UniqueIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.rare_token, self.common_tokens)
    }
}

/// Parses the `rare|common tokens` form used on the command line.
impl FromStr for UniqueIdentifier {
    type Err = IdentifierError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (rare, common) = s.split_once('|').ok_or_else(|| IdentifierError::BadSyntax(s.to_string()))?;
        UniqueIdentifier::new(rare.trim(), common)
    }
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn chars_match(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

/// Byte range of the first case-insensitive occurrence of `phrase` in
/// `text` that does not start or end in the middle of a word.
pub fn find_phrase(text: &str, phrase: &str) -> Option<(usize, usize)> {
    let pattern: Vec<char> = phrase.chars().collect();
    let (first, last) = (*pattern.first()?, *pattern.last()?);
    let indexed: Vec<(usize, char)> = text.char_indices().collect();
    for start in 0..indexed.len() {
        if start + pattern.len() > indexed.len() {
            break;
        }
        if is_word(first) && start > 0 && is_word(indexed[start - 1].1) {
            continue;
        }
        let window = &indexed[start..start + pattern.len()];
        if !window.iter().zip(&pattern).all(|(&(_, t), &p)| chars_match(t, p)) {
            continue;
        }
        let end_idx = start + pattern.len();
        if is_word(last) && end_idx < indexed.len() && is_word(indexed[end_idx].1) {
            continue;
        }
        let end = indexed.get(end_idx).map_or(text.len(), |&(i, _)| i);
        return Some((indexed[start].0, end));
    }
    None
}

/// Replaces the first occurrence of `subject_phrase` with the full
/// identifier, leaving the rest of the caption untouched.
pub fn apply_identifier(caption: &str, subject_phrase: &str, id: &UniqueIdentifier) -> Result<String, IdentifierError> {
    let (start, end) = find_phrase(caption, subject_phrase).ok_or_else(|| IdentifierError::SubjectPhraseNotFound {
        phrase: subject_phrase.to_string(),
        caption: caption.to_string(),
    })?;
    let mut out = String::with_capacity(caption.len() + id.full().len());
    out.push_str(&caption[..start]);
    out.push_str(&id.full());
    out.push_str(&caption[end..]);
    Ok(out)
}
