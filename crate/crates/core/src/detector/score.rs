use super::embedding::EmbeddingProvider;
use super::head::ClassifierHead;
use super::DetectorError;
use crate::record::{RawSentence, ScoredSentence};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Descriptive-class probability of `sentence`. Empty text is scored too.
pub fn score(head: &ClassifierHead, provider: &dyn EmbeddingProvider, sentence: &str) -> Result<f64, DetectorError> {
    Ok(head.predict(&provider.embed_sparse(sentence))?[1])
}

/// Keeps sentences scoring at least `threshold`, in input order.
///
/// Sentences that are blank after whitespace normalization are dropped
/// regardless of their score.
pub fn filter_descriptive(
    sentences: &[RawSentence],
    head: &ClassifierHead,
    provider: &dyn EmbeddingProvider,
    threshold: f64,
) -> Result<Vec<ScoredSentence>, DetectorError> {
    let mut out = Vec::new();
    for s in sentences {
        let q = score(head, provider, &s.sentence)?;
        if q >= threshold {
            out.extend(ScoredSentence::new(&s.species, &s.url, &s.sentence, q));
        }
    }
    Ok(out)
}

/// A trained head bundled with its provider and decision threshold.
pub struct Detector {
    pub provider: Box<dyn EmbeddingProvider>,
    pub head: ClassifierHead,
    pub threshold: f64,
}

impl Detector {
    pub fn new(
        provider: Box<dyn EmbeddingProvider>,
        head: ClassifierHead,
        threshold: f64,
    ) -> Result<Self, DetectorError> {
        if provider.dim() != head.input_dim() {
            return Err(DetectorError::DimensionMismatch {
                expected: head.input_dim(),
                found: provider.dim(),
            });
        }
        Ok(Self {
            provider,
            head,
            threshold,
        })
    }

    pub fn score(&self, sentence: &str) -> f64 {
        // dimensions were checked at construction
        score(&self.head, self.provider.as_ref(), sentence).unwrap_or(0.0)
    }

    pub fn filter(&self, sentences: &[RawSentence]) -> Vec<ScoredSentence> {
        filter_descriptive(sentences, &self.head, self.provider.as_ref(), self.threshold).unwrap_or_default()
    }
}

impl std::fmt::Debug for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Detector")
            .field("provider", &self.provider.descriptor())
            .field("input_dim", &self.head.input_dim())
            .field("hidden", &self.head.hidden())
            .field("threshold", &self.threshold)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::HashedNgramProvider;
    use chrono::{TimeZone, Utc};

    fn raw(sentence: &str) -> RawSentence {
        RawSentence {
            species: "Hedera helix".into(),
            url: "https://example.org/ivy".into(),
            sentence: sentence.into(),
            fetch_timestamp: Utc.timestamp_opt(0, 0).unwrap(),
            content_hash: String::new(),
        }
    }

    #[test]
    fn threshold_extremes() {
        let p = HashedNgramProvider::new(32, 0);
        let head = ClassifierHead::new(32, 8, 0.1, 3);
        let input: Vec<_> = ["Leaves alternate.", "War broke out.", "Fruit a berry."]
            .map(raw)
            .to_vec();
        let all = filter_descriptive(&input, &head, &p, 0.0).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(all[1].sentence, "War broke out.");
        assert!(filter_descriptive(&input, &head, &p, 1.0 + 1e-9).unwrap().is_empty());
    }

    #[test]
    fn empty_sentence_scores_but_is_not_kept() {
        let p = HashedNgramProvider::new(32, 0);
        let head = ClassifierHead::new(32, 8, 0.1, 3);
        let s = score(&head, &p, "").unwrap();
        assert!((0.0..=1.0).contains(&s));
        assert!(filter_descriptive(&[raw("  ")], &head, &p, 0.0).unwrap().is_empty());
    }

    #[test]
    fn detector_checks_dimensions() {
        let head = ClassifierHead::new(32, 8, 0.1, 3);
        assert!(Detector::new(Box::new(HashedNgramProvider::new(16, 0)), head, 0.5).is_err());
    }
}
