//! Descriptive sentences + trait schema → prompted model → matrix row.
//!
//! [`build_prompt`] fills the fixed template, an [`LlmBackend`] answers it,
//! [`parse_response`] keeps only in-schema `(value, evidence)` pairs, and
//! [`to_matrix_row`] turns the evidence into cells, all-zero traits becoming NA.

mod backend;
mod cache;
mod parse;
mod prompt;
mod run;

use thiserror::Error;

pub use backend::{Completion, HttpChatBackend, LlmBackend, LlmClientConfig, MockLlm, MOCK_MODEL_ID};
pub use cache::{AuditLog, AuditRecord, ResponseCache};
pub use parse::{parse_response, render_response, ParsedResponse, TraitEvidence};
pub use prompt::{
    build_prompt, estimate_tokens, fit_prompt, order_sentences, render_prompt, render_schema_block, PromptBudget,
    PromptBundle, DEFAULT_CONTEXT_LIMIT, DEFAULT_OUTPUT_RESERVE,
};
pub use run::{extract_species, to_matrix_row, ExtractMode, ExtractionResult, SpeciesExtraction, TokenCounts};

#[derive(Debug, Error)]
pub enum ExtractorError {
    #[error("the schema slice has no traits")]
    EmptySchema,
    #[error("no sentences to prompt with")]
    NoSentences,
    #[error("prompt needs ~{estimated} tokens but only {limit} are available")]
    ContextOverflow { estimated: usize, limit: usize },
    #[error("request to {endpoint} failed: {message}")]
    LlmTransport { endpoint: String, message: String },
    #[error("model {model_id} returned an empty completion")]
    LlmRefusal { model_id: String },
    #[error("no dictionary found in model answer: {0:?}")]
    UnparseableResponse(String),
    #[error("extractor config: {0}")]
    Config(String),
    #[error("response cache: {0}")]
    Cache(String),
}
