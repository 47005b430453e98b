use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::backend::LlmBackend;
use super::cache::{AuditRecord, ResponseCache};
use super::parse::{parse_response, TraitEvidence};
use super::prompt::{fit_prompt, order_sentences, PromptBudget};
use super::ExtractorError;
use crate::matrix::Cell;
use crate::record::ScoredSentence;
use crate::schema::TraitSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractMode {
    /// One call per species covering every trait.
    #[default]
    AllTraits,
    /// One call per species and trait.
    SingleTrait,
}

impl ExtractMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractMode::AllTraits => "all_traits",
            ExtractMode::SingleTrait => "single_trait",
        }
    }
}

impl fmt::Display for ExtractMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExtractMode {
    type Err = ExtractorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all_traits" => Ok(ExtractMode::AllTraits),
            "single_trait" => Ok(ExtractMode::SingleTrait),
            other => Err(ExtractorError::Config(format!("unknown extraction mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub input: usize,
    pub output: usize,
}

/// The parsed answer to one model call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub species: String,
    /// Empty when the answer could not be parsed; the traits asked about become NA.
    pub evidence: Vec<TraitEvidence>,
    /// Traits the call asked about.
    pub traits_asked: Vec<String>,
    pub raw_response: String,
    pub model_id: String,
    pub token_counts: TokenCounts,
    pub hallucinations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeciesExtraction {
    pub species: String,
    /// One cell per schema trait.
    pub row: Vec<Cell>,
    pub results: Vec<ExtractionResult>,
    pub audit: Vec<AuditRecord>,
    pub duplicates_removed: usize,
}

/// Merges call results into one matrix row. Traits nobody answered, and
/// traits with no positive evidence, are NA.
pub fn to_matrix_row(results: &[ExtractionResult], schema: &TraitSchema) -> Vec<Cell> {
    schema
        .traits()
        .iter()
        .map(|t| {
            let mut bits = vec![false; t.values().len()];
            for ev in results.iter().flat_map(|r| &r.evidence) {
                if crate::text::match_key(&ev.trait_name) != crate::text::match_key(t.name()) {
                    continue;
                }
                for (value, b) in &ev.values {
                    if let Some(i) = t.value_index(value) {
                        bits[i] |= *b;
                    }
                }
            }
            Cell::from_bits(bits)
        })
        .collect()
}

/// Runs the model over one species' descriptive sentences.
///
/// A species without sentences gets an all-NA row and no calls. Transport
/// failures abort; unparseable answers only blank the traits they covered.
pub fn extract_species(
    species: &str,
    sentences: &[ScoredSentence],
    schema: &TraitSchema,
    mode: ExtractMode,
    backend: &dyn LlmBackend,
    cache: Option<&ResponseCache>,
    budget: &PromptBudget,
) -> Result<SpeciesExtraction, ExtractorError> {
    let (_, duplicates_removed) = order_sentences(sentences);
    if duplicates_removed > 0 {
        log::info!("{species}: {duplicates_removed} duplicate sentences removed");
    }
    if sentences.is_empty() {
        return Ok(SpeciesExtraction {
            species: species.to_string(),
            row: vec![Cell::Na; schema.len()],
            results: Vec::new(),
            audit: Vec::new(),
            duplicates_removed,
        });
    }
    let slices: Vec<TraitSchema> = match mode {
        ExtractMode::AllTraits => vec![schema.clone()],
        ExtractMode::SingleTrait => schema.traits().iter().filter_map(|t| schema.single(t.name())).collect(),
    };

    let mut results = Vec::new();
    let mut audit = Vec::new();
    for slice in &slices {
        let bundle = fit_prompt(species, sentences, slice, budget)?;
        let (completion, cache_hit) = match cache {
            Some(c) => c.complete(backend, &bundle.rendered)?,
            None => (backend.complete(&bundle.rendered)?, false),
        };
        let parsed = match parse_response(&completion.text, slice) {
            Ok(p) => Some(p),
            Err(e) => {
                log::warn!("{species}: {e}");
                None
            }
        };
        let hallucinations = parsed.as_ref().map_or(0, |p| p.hallucinations);
        audit.push(AuditRecord {
            species: species.to_string(),
            mode: mode.to_string(),
            trait_name: (mode == ExtractMode::SingleTrait).then(|| slice.traits()[0].name().to_string()),
            model_id: backend.model_id().to_string(),
            input_tokens: completion.input_tokens,
            output_tokens: completion.output_tokens,
            cache_hit,
            hallucination_count: hallucinations,
            parsed: parsed.is_some(),
            sentences_used: bundle.sentences_used,
            sentences_dropped: bundle.sentences_dropped,
            duplicates_removed,
        });
        results.push(ExtractionResult {
            species: species.to_string(),
            evidence: parsed.map(|p| p.evidence).unwrap_or_default(),
            traits_asked: slice.traits().iter().map(|t| t.name().to_string()).collect(),
            raw_response: completion.text,
            model_id: backend.model_id().to_string(),
            token_counts: super::TokenCounts {
                input: completion.input_tokens,
                output: completion.output_tokens,
            },
            hallucinations,
        });
    }
    Ok(SpeciesExtraction {
        species: species.to_string(),
        row: to_matrix_row(&results, schema),
        results,
        audit,
        duplicates_removed,
    })
}
