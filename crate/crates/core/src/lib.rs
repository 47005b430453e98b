//! Fill binary species–trait matrices from unstructured web text.
//!
//! The pipeline has three stages plus evaluation:
//!
//! 1. [`harvester`]: phrase-query a search backend with the species binomial,
//!    fetch the top pages, keep the ones whose title or headings name the species.
//! 2. [`weak_label`] and [`detector`]: train a descriptive-sentence classifier
//!    on section-header labels with a noise-robust loss, then keep sentences
//!    scoring at least 0.5.
//! 3. [`extractor`]: prompt a chat-completion model with the kept sentences
//!    and the trait schema, and parse its `(value, evidence)` answer.
//!
//! [`evaluation`] compares the resulting [`SpeciesTraitMatrix`] with curated
//! references, and [`pipeline`] wires the stages into resumable commands.

pub mod detector;
pub mod error;
pub mod evaluation;
pub mod extractor;
pub mod fsutil;
pub mod harvester;
pub mod http;
pub mod matrix;
pub mod pipeline;
pub mod record;
pub mod schema;
pub mod text;
pub mod weak_label;

pub use error::CoreError;
pub use matrix::{binary_encode, coverage, Cell, MatrixBuilder, SpeciesTraitMatrix};
pub use record::{Provenance, RawSentence, ScoredSentence};
pub use schema::{Trait, TraitSchema};
