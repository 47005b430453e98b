//! Weakly labeled training corpus for the description detector.
//!
//! Sections of structured species pages are labeled descriptive or not by
//! their header, cut into random 10–512 token spans, and split by source
//! family so that evaluation runs on sources never seen in training.

mod corpus;
mod rules;
mod sentences;
mod spans;
mod tokenize;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corpus::{build_corpus, ClassCounts, Corpus, CorpusConfig, CorpusStats};
pub use rules::{augment_negatives, label_sections, HeaderRules};
pub use sentences::{split_sentences, SentenceSplitter, DEFAULT_ABBREVIATIONS};
pub use spans::{make_spans, span_lengths, LabeledSpan, MAX_SPAN_TOKENS, MIN_SPAN_TOKENS};
pub use tokenize::{tokenize, tokenize_with_offsets, Token, NUM_TOKEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Descriptive,
    NonDescriptive,
}

impl Label {
    /// Class index used by the classifier: 0 = non-descriptive, 1 = descriptive.
    pub fn class_index(self) -> usize {
        match self {
            Label::NonDescriptive => 0,
            Label::Descriptive => 1,
        }
    }

    pub fn from_class_index(i: usize) -> Label {
        if i == 1 {
            Label::Descriptive
        } else {
            Label::NonDescriptive
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Descriptive => "descriptive",
            Label::NonDescriptive => "non_descriptive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub header: String,
    #[serde(default)]
    pub body: String,
}

/// A page from a structured source, already split into (header, body) sections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionedDocument {
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<String>,
    pub sections: Vec<Section>,
}

#[derive(Debug, Error)]
pub enum WeakLabelError {
    #[error("header rule table is empty")]
    NoRules,
    #[error("invalid header pattern {0:?}: {1}")]
    BadPattern(String, String),
    #[error("span has {0} tokens, outside [10, 512]")]
    SpanLength(usize),
    #[error("section with an empty header in document from {0:?}")]
    EmptyHeader(String),
    #[error("json: {0}")]
    Json(String),
    #[error("{path}:{line}: {message}")]
    Record { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SectionedDocument {
    pub fn validate(&self) -> Result<(), WeakLabelError> {
        if self.sections.iter().any(|s| s.header.trim().is_empty()) {
            return Err(WeakLabelError::EmptyHeader(self.source_id.clone()));
        }
        Ok(())
    }
}

/// Reads JSON-lines documents, one [`SectionedDocument`] per line.
pub fn read_documents(path: impl AsRef<Path>) -> Result<Vec<SectionedDocument>, WeakLabelError> {
    let docs: Vec<SectionedDocument> = read_jsonl(path.as_ref())?;
    for d in &docs {
        d.validate()?;
    }
    Ok(docs)
}

/// Corpus file: one `{text, label, source_id, species?}` record per line.
pub fn write_spans(path: impl AsRef<Path>, spans: &[LabeledSpan]) -> Result<(), WeakLabelError> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in spans {
        let line = serde_json::to_string(s).map_err(|e| WeakLabelError::Json(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_spans(path: impl AsRef<Path>) -> Result<Vec<LabeledSpan>, WeakLabelError> {
    let path = path.as_ref();
    let raw: Vec<LabeledSpan> = read_jsonl(path)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.validated().map_err(|e| WeakLabelError::Record {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, WeakLabelError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| WeakLabelError::Record {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
