use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingProvider;
use super::head::ClassifierHead;
use super::train::{embed_spans, Example};
use crate::weak_label::LabeledSpan;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of examples whose reference label is this class.
    pub count: usize,
}

impl ClassMetrics {
    /// Precision, recall and harmonic-mean F1 from raw counts; undefined ratios are 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            count: tp + fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorMetrics {
    pub non_descriptive: ClassMetrics,
    pub descriptive: ClassMetrics,
}

impl DetectorMetrics {
    pub fn macro_f1(&self) -> f64 {
        (self.non_descriptive.f1 + self.descriptive.f1) / 2.0
    }
}

/// Per-class metrics on labeled spans; a span is predicted descriptive when its score ≥ `threshold`.
pub fn evaluate_detector(
    head: &ClassifierHead,
    provider: &dyn EmbeddingProvider,
    test: &[LabeledSpan],
    threshold: f64,
) -> DetectorMetrics {
    evaluate_examples(head, &embed_spans(test, provider), threshold)
}

pub fn evaluate_examples(head: &ClassifierHead, examples: &[Example], threshold: f64) -> DetectorMetrics {
    // confusion[truth][predicted]
    let mut confusion = [[0usize; 2]; 2];
    for ex in examples {
        let q = head.predict(&ex.x).map(|q| q[1]).unwrap_or(0.0);
        let pred = usize::from(q >= threshold);
        confusion[ex.class][pred] += 1;
    }
    let class = |c: usize| {
        let o = 1 - c;
        ClassMetrics::from_counts(confusion[c][c], confusion[o][c], confusion[c][o])
    };
    DetectorMetrics {
        non_descriptive: class(0),
        descriptive: class(1),
    }
}

/// Classes as rows, `split × metric` as columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub splits: Vec<(String, DetectorMetrics)>,
}

impl MetricsTable {
    pub fn push(&mut self, split: impl Into<String>, metrics: DetectorMetrics) {
        self.splits.push((split.into(), metrics));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for (split, _) in &self.splits {
            for m in ["precision", "recall", "f1", "sentences"] {
                let _ = write!(out, ",{split}_{m}");
            }
        }
        out.push('\n');
        for (name, pick) in [
            (
                "descriptive",
                (|m: &DetectorMetrics| m.descriptive) as fn(&DetectorMetrics) -> ClassMetrics,
            ),
            ("non_descriptive", |m: &DetectorMetrics| m.non_descriptive),
        ] {
            out.push_str(name);
            for (_, m) in &self.splits {
                let c = pick(m);
                let _ = write!(out, ",{:.4},{:.4},{:.4},{}", c.precision, c.recall, c.f1, c.count);
            }
            out.push('\n');
        }
        out
    }
}
