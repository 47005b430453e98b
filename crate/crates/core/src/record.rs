//! Sentence records passed between stages and their provenance.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::text::collapse_whitespace;

/// Where a piece of text came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub url: String,
    pub fetch_timestamp: DateTime<Utc>,
    /// Hex SHA-256 of the fetched body.
    pub content_hash: String,
}

impl Provenance {
    pub fn new(url: impl Into<String>, fetch_timestamp: DateTime<Utc>, body: &[u8]) -> Self {
        Self {
            url: url.into(),
            fetch_timestamp,
            content_hash: content_digest(body),
        }
    }
}

/// Hex SHA-256 digest.
pub fn content_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A harvested sentence before scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSentence {
    pub species: String,
    pub url: String,
    pub sentence: String,
    pub fetch_timestamp: DateTime<Utc>,
    pub content_hash: String,
}

/// A sentence with its descriptiveness score in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    pub species: String,
    pub url: String,
    pub sentence: String,
    pub score: f64,
}

impl ScoredSentence {
    /// Returns `None` when the sentence is blank after whitespace collapsing or the score is not finite.
    pub fn new(species: impl Into<String>, url: impl Into<String>, sentence: &str, score: f64) -> Option<Self> {
        let sentence = collapse_whitespace(sentence);
        if sentence.is_empty() || !score.is_finite() {
            return None;
        }
        Some(Self {
            species: species.into(),
            url: url.into(),
            sentence,
            score: score.clamp(0.0, 1.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_deterministic() {
        assert_eq!(content_digest(b"abc"), content_digest(b"abc"));
        assert_ne!(content_digest(b"abc"), content_digest(b"abd"));
        assert_eq!(content_digest(b"").len(), 64);
    }

    #[test]
    fn scored_sentence_invariants() {
        assert!(ScoredSentence::new("A b", "u", "   \n", 0.9).is_none());
        assert!(ScoredSentence::new("A b", "u", "Leaves opposite.", f64::NAN).is_none());
        let s = ScoredSentence::new("A b", "u", " Leaves \n opposite. ", 0.7).unwrap();
        assert_eq!(s.sentence, "Leaves opposite.");
    }
}
