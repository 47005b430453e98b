//! Random span augmentation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize, tokenize_with_offsets};
use super::{Label, WeakLabelError};

pub const MIN_SPAN_TOKENS: usize = 10;
pub const MAX_SPAN_TOKENS: usize = 512;

/// A weakly labeled run of 10–512 tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSpan {
    /// Source text covering exactly the span's tokens.
    pub text: String,
    #[serde(skip)]
    tokens: Vec<String>,
    pub label: Label,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<String>,
}

impl LabeledSpan {
    pub fn new(text: impl Into<String>, label: Label, source_id: impl Into<String>) -> Result<Self, WeakLabelError> {
        let text = text.into();
        let tokens = tokenize(&text);
        if !(MIN_SPAN_TOKENS..=MAX_SPAN_TOKENS).contains(&tokens.len()) {
            return Err(WeakLabelError::SpanLength(tokens.len()));
        }
        Ok(Self {
            text,
            tokens,
            label,
            source_id: source_id.into(),
            species: None,
        })
    }

    pub fn with_species(mut self, species: Option<String>) -> Self {
        self.species = species;
        self
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Re-derives tokens after deserialization and checks the length bound.
    pub fn validated(mut self) -> Result<Self, WeakLabelError> {
        self.tokens = tokenize(&self.text);
        if !(MIN_SPAN_TOKENS..=MAX_SPAN_TOKENS).contains(&self.tokens.len()) {
            return Err(WeakLabelError::SpanLength(self.tokens.len()));
        }
        Ok(self)
    }
}

/// Token counts of consecutive spans partitioning `total` tokens.
///
/// Lengths are drawn uniformly from `[10, 512]`. A final remainder below 10
/// tokens is merged into the previous span; if that would exceed 512, the
/// merged run is re-cut into two spans that both respect the bounds.
/// Streams shorter than 10 tokens produce no spans.
pub fn span_lengths(total: usize, rng: &mut impl Rng) -> Vec<usize> {
    span_lengths_with(total, || rng.random_range(MIN_SPAN_TOKENS..=MAX_SPAN_TOKENS))
}

fn span_lengths_with(total: usize, mut draw: impl FnMut() -> usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut remaining = total;
    while remaining > 0 {
        if remaining < MIN_SPAN_TOKENS {
            match out.pop() {
                None => return Vec::new(),
                Some(prev) => {
                    let merged = prev + remaining;
                    if merged <= MAX_SPAN_TOKENS {
                        out.push(merged);
                    } else {
                        out.push(merged - MIN_SPAN_TOKENS);
                        out.push(MIN_SPAN_TOKENS);
                    }
                }
            }
            break;
        }
        let take = draw().min(remaining);
        out.push(take);
        remaining -= take;
    }
    out
}

/// Randomly cuts the token stream of `text` into labeled spans; deterministic in `seed`.
pub fn make_spans(text: &str, label: Label, source_id: &str, seed: u64) -> Vec<LabeledSpan> {
    let tokens = tokenize_with_offsets(text);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut at = 0;
    for len in span_lengths(tokens.len(), &mut rng) {
        let first = &tokens[at];
        let last = &tokens[at + len - 1];
        out.push(LabeledSpan {
            text: text[first.start..last.end].to_string(),
            tokens: tokens[at..at + len].iter().map(|t| t.text.clone()).collect(),
            label,
            source_id: source_id.to_string(),
            species: None,
        });
        at += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn short_text_yields_nothing() {
        assert!(make_spans("only five words here now", Label::Descriptive, "s", 1).is_empty());
        assert!(make_spans("", Label::Descriptive, "s", 1).is_empty());
    }

    #[test]
    fn span_text_matches_tokens() {
        let text = words(700);
        for s in make_spans(&text, Label::NonDescriptive, "wikipedia", 3) {
            assert_eq!(tokenize(&s.text), s.tokens());
            assert_eq!(s.source_id, "wikipedia");
        }
    }

    #[test]
    fn merge_that_would_overflow_is_recut() {
        let mut draws = [510usize].into_iter();
        assert_eq!(span_lengths_with(515, || draws.next().unwrap()), [505, 10]);
        let mut draws = [100usize].into_iter();
        assert_eq!(span_lengths_with(104, || draws.next().unwrap()), [104]);
        for total in [515usize, 519, 521, 1033] {
            let mut rng = ChaCha8Rng::seed_from_u64(total as u64);
            let lens = span_lengths(total, &mut rng);
            assert_eq!(lens.iter().sum::<usize>(), total);
            assert!(
                lens.iter().all(|l| (MIN_SPAN_TOKENS..=MAX_SPAN_TOKENS).contains(l)),
                "{lens:?}"
            );
        }
    }

    proptest! {
        #[test]
        fn spans_partition_and_respect_bounds(total in 10usize..3000, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lens = span_lengths(total, &mut rng);
            prop_assert_eq!(lens.iter().sum::<usize>(), total);
            prop_assert!(lens.iter().all(|l| (MIN_SPAN_TOKENS..=MAX_SPAN_TOKENS).contains(l)));
        }

        #[test]
        fn same_seed_same_spans(n in 0usize..1200, seed in any::<u64>()) {
            let text = words(n);
            let a = make_spans(&text, Label::Descriptive, "s", seed);
            let b = make_spans(&text, Label::Descriptive, "s", seed);
            prop_assert_eq!(&a, &b);
            let sum: usize = a.iter().map(|s| s.tokens().len()).sum();
            if n >= MIN_SPAN_TOKENS { prop_assert_eq!(sum, n); } else { prop_assert_eq!(sum, 0); }
        }
    }
}
