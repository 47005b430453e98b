use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rules::{augment_negatives, label_sections, HeaderRules};
use super::spans::{make_spans, LabeledSpan};
use super::{Label, SectionedDocument};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    /// Source families used for training and validation; every other family is test-only.
    pub train_sources: Vec<String>,
    /// Fraction of training-family documents held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            train_sources: vec!["wikipedia".into(), "powo".into()],
            val_fraction: 0.15,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub descriptive: usize,
    pub non_descriptive: usize,
}

impl ClassCounts {
    pub fn of(spans: &[LabeledSpan]) -> Self {
        let descriptive = spans.iter().filter(|s| s.label == Label::Descriptive).count();
        Self {
            descriptive,
            non_descriptive: spans.len() - descriptive,
        }
    }

    pub fn total(&self) -> usize {
        self.descriptive + self.non_descriptive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub train: ClassCounts,
    pub val: ClassCounts,
    pub test: ClassCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub train: Vec<LabeledSpan>,
    pub val: Vec<LabeledSpan>,
    pub test: Vec<LabeledSpan>,
}

impl Corpus {
    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            train: ClassCounts::of(&self.train),
            val: ClassCounts::of(&self.val),
            test: ClassCounts::of(&self.test),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Split {
    Train,
    Val,
    Test,
}

/// Builds train/val/test spans from sectioned pages plus random negative pages.
///
/// Documents are ordered by source id (stable within a source), so the
/// output is canonical regardless of how the inputs were gathered. Training
/// families are split by document into train and validation; the remaining
/// families go to test.
pub fn build_corpus(
    docs: &[SectionedDocument],
    random_docs: &[SectionedDocument],
    rules: &HeaderRules,
    cfg: &CorpusConfig,
) -> Corpus {
    let mut all: Vec<(&SectionedDocument, bool)> = docs
        .iter()
        .map(|d| (d, false))
        .chain(random_docs.iter().map(|d| (d, true)))
        .collect();
    all.sort_by(|a, b| a.0.source_id.cmp(&b.0.source_id));

    let train_families: HashSet<&str> = cfg.train_sources.iter().map(String::as_str).collect();
    let mut train_idx: Vec<usize> = (0..all.len())
        .filter(|&i| train_families.contains(all[i].0.source_id.as_str()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    train_idx.shuffle(&mut rng);
    let n_val = (train_idx.len() as f64 * cfg.val_fraction).round() as usize;
    let val_set: HashSet<usize> = train_idx[..n_val.min(train_idx.len())].iter().copied().collect();

    let mut corpus = Corpus::default();
    for (di, (doc, negative_only)) in all.iter().enumerate() {
        let split = if !train_families.contains(doc.source_id.as_str()) {
            Split::Test
        } else if val_set.contains(&di) {
            Split::Val
        } else {
            Split::Train
        };
        let labeled = if *negative_only {
            augment_negatives(std::slice::from_ref(*doc))
        } else {
            label_sections(doc, rules)
        };
        for (si, (text, label)) in labeled.iter().enumerate() {
            let seed = mix_seed(cfg.seed, di as u64, si as u64);
            let spans = make_spans(text, *label, &doc.source_id, seed)
                .into_iter()
                .map(|s| s.with_species(doc.species.clone()));
            match split {
                Split::Train => corpus.train.extend(spans),
                Split::Val => corpus.val.extend(spans),
                Split::Test => corpus.test.extend(spans),
            }
        }
    }
    corpus
}

fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
