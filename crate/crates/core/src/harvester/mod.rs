//! Species binomial → candidate web text.
//!
//! [`build_query`] makes an exact-phrase query, a [`SearchBackend`] returns
//! ranked hits, a [`Fetcher`] downloads and extracts them politely, and
//! [`header_filter`] keeps pages whose title or top headings name the species.

mod fetch;
pub mod html;
mod mock;
pub mod robots;
mod search;
mod species;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::Provenance;
use crate::text::collapse_whitespace;

pub use fetch::{CacheEntry, FetchConfig, Fetcher, RawCache};
pub use mock::{MockSearchBackend, MockWeb, MOCK_HOST};
pub use search::{CachedSearch, HttpSearchBackend, SearchBackend, SEARCH_API_KEY_ENV, SEARCH_API_URL_ENV};
pub use species::{document_sentences, harvest_species, HarvestConfig, HarvestReport, UrlOutcome, UrlStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    /// 1-based position in the backend's ranking.
    pub rank: usize,
    pub url: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchedDocument {
    pub provenance: Provenance,
    pub http_status: u16,
    pub media_type: String,
    /// Visible text, one block per line.
    pub body_text: String,
    /// Title and h1–h3 headings.
    pub header_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarvestError {
    #[error("malformed binomial {0:?}: expected genus and epithet")]
    MalformedBinomial(String),
    #[error("search backend error: {message}")]
    SearchBackend { message: String, retriable: bool },
    #[error("fetch of {url} failed: {message}")]
    Fetch { url: String, message: String },
    #[error("skipped {url}: media type {media_type} is not HTML")]
    SkippedNonHtml { url: String, media_type: String },
    #[error("skipped {url}: disallowed by robots.txt")]
    SkippedByPolicy { url: String },
    #[error("invalid URL {url}: {reason}")]
    InvalidUrl { url: String, reason: String },
    #[error("environment variable {0} is not set")]
    MissingEnv(&'static str),
    #[error("cache: {0}")]
    Cache(String),
}

/// The binomial reduced to its first two tokens (genus and epithet).
pub fn normalize_binomial(binomial: &str) -> Result<String, HarvestError> {
    let tokens: Vec<&str> = binomial.split_whitespace().take(2).collect();
    if tokens.len() != 2 {
        return Err(HarvestError::MalformedBinomial(binomial.to_string()));
    }
    Ok(tokens.join(" "))
}

/// Exact-phrase query for a species. Authority strings after the epithet are dropped.
pub fn build_query(binomial: &str) -> Result<String, HarvestError> {
    Ok(format!("\"{}\"", normalize_binomial(binomial)?))
}

/// True when the case-folded binomial occurs in the case-folded header text.
pub fn header_filter(doc: &FetchedDocument, binomial: &str) -> bool {
    header_matches(&doc.header_text, binomial)
}

pub fn header_matches(header_text: &str, binomial: &str) -> bool {
    let needle = collapse_whitespace(binomial).to_lowercase();
    !needle.is_empty() && collapse_whitespace(header_text).to_lowercase().contains(&needle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queries() {
        assert_eq!(build_query("Hedera helix").unwrap(), "\"Hedera helix\"");
        assert_eq!(build_query("Albizia coriaria").unwrap(), "\"Albizia coriaria\"");
        assert_eq!(build_query("  Hedera   helix L. ").unwrap(), "\"Hedera helix\"");
        assert!(matches!(build_query("Hedera"), Err(HarvestError::MalformedBinomial(_))));
        assert!(build_query("").is_err());
    }

    #[test]
    fn header_matching() {
        assert!(header_matches(
            "Albizia coriaria \u{2014} useful trees",
            "Albizia coriaria"
        ));
        assert!(!header_matches("Ivy control methods", "Hedera helix"));
        assert!(header_matches("HEDERA HELIX (English Ivy)", "Hedera helix"));
        assert!(header_matches("Hedera\n  helix", "Hedera helix"));
        assert!(!header_matches("anything", "  "));
    }
}
