//! Predicted matrix vs. curated reference: precision, recall, F1, coverage,
//! value co-occurrence, and the expert false-negative study.

mod cooccur;
mod fnstudy;
mod report;
mod scores;

use thiserror::Error;

pub use cooccur::{cooccurrence, cross_cooccurrence, CooccurrenceKind, CooccurrenceMatrix};
pub use fnstudy::{
    binary_confusion, confusion_from_counts, read_expert_rows, run_fn_study, select_snippets, write_records,
    ConfusionReport, ExpertRow, ExpertVerdict, FnStudyRecord,
};
pub use report::{per_trait_csv, report_json, report_text};
pub use scores::{per_trait_scores, score_matrix, Counts, EvalReport, TraitScore};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("matrices are not comparable: {0}")]
    SchemaMismatch(String),
    #[error("unknown trait {0:?}")]
    UnknownTrait(String),
    #[error("the false-negative study has no records")]
    EmptyStudy,
    #[error("{0}")]
    Malformed(String),
    #[error("extraction failed: {0}")]
    Extractor(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
