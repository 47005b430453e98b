//! Seeded synthetic corpus for exercising the detector.
//!
//! Each class draws tokens from its own vocabulary with Zipf-like
//! frequencies; the two vocabularies share no word. Training labels are
//! corrupted by symmetric noise while the test split keeps clean labels.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::weak_label::{Label, LabeledSpan};

/// Frequent real words heading the descriptive vocabulary.
pub const DESCRIPTIVE_SEED_WORDS: &[&str] = &[
    "the",
    "leaves",
    "are",
    "alternate",
    "opposite",
    "flowers",
    "petals",
    "fruit",
    "berry",
    "ovate",
    "lanceolate",
    "glabrous",
    "pubescent",
    "sepals",
    "stamens",
    "bark",
    "smooth",
    "leaflets",
    "pinnate",
    "margin",
    "serrate",
    "entire",
    "apex",
    "acute",
    "base",
    "petiole",
    "long",
    "wide",
    "yellow",
    "white",
    "capsule",
    "seeds",
    "inflorescence",
    "panicle",
    "racemes",
    "corolla",
    "calyx",
    "tree",
    "shrub",
    "crown",
];

/// Frequent real words heading the non-descriptive vocabulary.
pub const NON_DESCRIPTIVE_SEED_WORDS: &[&str] = &[
    "was",
    "settled",
    "during",
    "by",
    "metropolitan",
    "france",
    "iron",
    "age",
    "celtic",
    "tribes",
    "war",
    "king",
    "century",
    "empire",
    "treaty",
    "population",
    "region",
    "capital",
    "city",
    "government",
    "history",
    "ancient",
    "roman",
    "republic",
    "colony",
    "trade",
    "named",
    "after",
    "founded",
    "province",
    "army",
    "battle",
    "election",
    "parliament",
    "river",
    "border",
    "invasion",
    "kingdom",
    "revolution",
    "museum",
];

const DESCRIPTIVE_SYLLABLES: &[&str] = &[
    "la", "le", "li", "lo", "pa", "pe", "pi", "po", "ta", "te", "ti", "tu", "ra", "re", "ri", "ru",
];
const NON_DESCRIPTIVE_SYLLABLES: &[&str] = &[
    "ka", "ke", "ki", "ko", "ga", "ge", "gi", "go", "da", "de", "di", "du", "va", "ve", "vi", "vo",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Probability mass of flipped training labels.
    pub noise: f64,
    /// Words per class vocabulary, seed words included.
    pub vocab_size: usize,
    /// Zipf exponent of word frequencies.
    pub zipf_exponent: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_train: 10_000,
            n_test: 2_000,
            noise: 0.30,
            vocab_size: 2_000,
            zipf_exponent: 1.0,
            min_len: 10,
            max_len: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    /// Training spans carrying possibly flipped labels.
    pub train: Vec<LabeledSpan>,
    /// True labels of `train`, index-aligned.
    pub train_clean: Vec<Label>,
    /// Held-out spans with true labels.
    pub test: Vec<LabeledSpan>,
}

impl SyntheticCorpus {
    pub fn flipped(&self) -> usize {
        self.train
            .iter()
            .zip(&self.train_clean)
            .filter(|(s, l)| s.label != **l)
            .count()
    }
}

/// Class vocabulary: seed words followed by generated pseudo-words.
pub fn vocabulary(label: Label, size: usize) -> Vec<String> {
    let (seed_words, syllables) = match label {
        Label::Descriptive => (DESCRIPTIVE_SEED_WORDS, DESCRIPTIVE_SYLLABLES),
        Label::NonDescriptive => (NON_DESCRIPTIVE_SEED_WORDS, NON_DESCRIPTIVE_SYLLABLES),
    };
    let mut words: Vec<String> = seed_words.iter().map(|w| w.to_string()).collect();
    let n = syllables.len();
    let mut i = 0usize;
    while words.len() < size {
        // base-n digits of i, padded to three syllables
        let (mut k, mut w, mut digits) = (i, String::new(), 0);
        while k > 0 || digits < 3 {
            w.push_str(syllables[k % n]);
            k /= n;
            digits += 1;
        }
        words.push(w);
        i += 1;
    }
    words.truncate(size.max(1));
    words
}

struct ClassSampler {
    words: Vec<String>,
    dist: WeightedIndex<f64>,
}

impl ClassSampler {
    fn new(label: Label, cfg: &SyntheticConfig) -> Self {
        let words = vocabulary(label, cfg.vocab_size);
        let weights = (1..=words.len()).map(|r| (r as f64).powf(-cfg.zipf_exponent));
        let dist = WeightedIndex::new(weights).expect("non-empty positive weights");
        Self { words, dist }
    }

    fn span(&self, cfg: &SyntheticConfig, rng: &mut impl Rng) -> String {
        let len = rng.random_range(cfg.min_len..=cfg.max_len);
        (0..len)
            .map(|_| self.words[self.dist.sample(rng)].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticCorpus {
    assert!(cfg.min_len >= 10 && cfg.max_len >= cfg.min_len && cfg.max_len <= 512);
    assert!((0.0..=1.0).contains(&cfg.noise));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samplers = [
        ClassSampler::new(Label::NonDescriptive, cfg),
        ClassSampler::new(Label::Descriptive, cfg),
    ];
    let draw = |n: usize, rng: &mut ChaCha8Rng| -> Vec<(String, Label)> {
        (0..n)
            .map(|i| {
                let label = Label::from_class_index(i % 2);
                (samplers[label.class_index()].span(cfg, rng), label)
            })
            .collect()
    };
    let mut train = draw(cfg.n_train, &mut rng);
    train.shuffle(&mut rng);
    let test = draw(cfg.n_test, &mut rng);

    let mut flip: Vec<usize> = (0..train.len()).collect();
    flip.shuffle(&mut rng);
    flip.truncate((cfg.noise * train.len() as f64).round() as usize);
    let train_clean: Vec<Label> = train.iter().map(|(_, l)| *l).collect();
    for i in flip {
        train[i].1 = Label::from_class_index(1 - train[i].1.class_index());
    }

    let to_span = |(text, label): (String, Label), tag: &str| {
        LabeledSpan::new(text, label, tag).expect("generated spans respect the length bounds")
    };
    SyntheticCorpus {
        train: train.into_iter().map(|t| to_span(t, "synthetic")).collect(),
        train_clean,
        test: test.into_iter().map(|t| to_span(t, "synthetic")).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn vocabularies_are_disjoint() {
        let a: HashSet<_> = vocabulary(Label::Descriptive, 5000).into_iter().collect();
        let b: HashSet<_> = vocabulary(Label::NonDescriptive, 5000).into_iter().collect();
        assert_eq!(a.len(), 5000);
        assert_eq!(b.len(), 5000);
        assert!(a.is_disjoint(&b));
    }

    #[test]
    fn noise_rate_and_determinism() {
        let cfg = SyntheticConfig {
            n_train: 1000,
            n_test: 100,
            ..SyntheticConfig::default()
        };
        let c = generate(&cfg);
        assert_eq!(c.train.len(), 1000);
        assert_eq!(c.flipped(), 300);
        assert!(c
            .train
            .iter()
            .chain(&c.test)
            .all(|s| (10..=16).contains(&s.tokens().len())));
        let d = generate(&cfg);
        assert_eq!(c.train, d.train);
        assert_eq!(c.test, d.test);
    }
}
