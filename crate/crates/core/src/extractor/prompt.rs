use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ExtractorError;
use crate::record::ScoredSentence;
use crate::schema::TraitSchema;
use crate::text::collapse_whitespace;

pub const DEFAULT_CONTEXT_LIMIT: usize = 32_768;
pub const DEFAULT_OUTPUT_RESERVE: usize = 2_048;

pub(crate) const INPUT_HEADING: &str = "Input text:";
pub(crate) const SCHEMA_HEADING: &str = "Initial dictionary of traits with all possible values:";

const PREAMBLE: &str = "We will provide an input text with botanical descriptions, followed by a dictionary where each key 'name' represents a trait name, referring to specific organ or other element of the plant, and is associated to a list with all possible trait values for that trait, ['value_1', 'value_2', ..., 'value_n'].";

const INSTRUCTIONS: &str = "Turn each string s in the list of values in the dictionary into a sublist (s,b), where b is a binary number,either 0 or 1, indicating whether there is strong evidence for value s in the input text. Double check that 'value_i' is reported referring to trait 'name' in the text, and not to a different trait. Always set 'b' to '0' if you are not 100% sure about the association. Do not add new trait values and do not modify the initial ones.Return the dictionary of traits and sublists of (value, evidence) containing all possible names and (values, evidence) tuples.";

const OUTPUT_RULE: &str = "Output only a dictionary in JSON format, no other text at all.";

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Token budget for one request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBudget {
    pub context_limit: usize,
    /// Tokens kept free for the completion.
    pub output_reserve: usize,
}

impl Default for PromptBudget {
    fn default() -> Self {
        Self {
            context_limit: DEFAULT_CONTEXT_LIMIT,
            output_reserve: DEFAULT_OUTPUT_RESERVE,
        }
    }
}

impl PromptBudget {
    pub fn input_limit(&self) -> usize {
        self.context_limit.saturating_sub(self.output_reserve)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub species: String,
    /// Sentences one per line, in prompt order.
    pub input_text: String,
    pub schema_slice: TraitSchema,
    pub rendered: String,
    pub sentences_used: usize,
    /// Lowest-scoring sentences left out to fit the budget.
    pub sentences_dropped: usize,
}

impl PromptBundle {
    pub fn estimated_tokens(&self) -> usize {
        estimate_tokens(&self.rendered)
    }
}

/// The dictionary block: trait names double-quoted, values single-quoted, one trait per line.
pub fn render_schema_block(schema: &TraitSchema) -> String {
    let lines: Vec<String> = schema
        .traits()
        .iter()
        .map(|t| {
            let values: Vec<String> = t.values().iter().map(|v| single_quoted(v)).collect();
            format!("{}: [{}]", serde_json::to_string(t.name()).unwrap(), values.join(", "))
        })
        .collect();
    format!("{{{}}}", lines.join(",\n"))
}

fn single_quoted(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

pub fn render_prompt(species: &str, input_text: &str, schema: &TraitSchema) -> String {
    format!(
        "We are interested in obtaining botanical trait information about the species {species}.\n\n\
         {PREAMBLE}\n\n\
         {INPUT_HEADING}\n{input_text}\n\n\
         {SCHEMA_HEADING}\n{}\n\n\
         {INSTRUCTIONS}\n\n\
         {OUTPUT_RULE}",
        render_schema_block(schema)
    )
}

/// Prompt order: descending score, then URL; first occurrence wins among identical sentences.
///
/// Returns the ordered sentences and the number of duplicates removed.
pub fn order_sentences(sentences: &[ScoredSentence]) -> (Vec<&ScoredSentence>, usize) {
    let mut best: HashMap<String, &ScoredSentence> = HashMap::new();
    let mut keys = Vec::new();
    for s in sentences {
        let key = collapse_whitespace(&s.sentence);
        match best.get(&key) {
            Some(prev) if prev.score >= s.score => {}
            Some(_) => {
                best.insert(key, s);
            }
            None => {
                keys.push(key.clone());
                best.insert(key, s);
            }
        }
    }
    let duplicates = sentences.len() - keys.len();
    let mut ordered: Vec<&ScoredSentence> = keys.iter().map(|k| best[k]).collect();
    ordered.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.url.cmp(&b.url))
    });
    (ordered, duplicates)
}

fn bundle(species: &str, used: &[&ScoredSentence], dropped: usize, schema: &TraitSchema) -> PromptBundle {
    let input_text = used
        .iter()
        .map(|s| collapse_whitespace(&s.sentence))
        .collect::<Vec<_>>()
        .join("\n");
    PromptBundle {
        species: species.to_string(),
        rendered: render_prompt(species, &input_text, schema),
        input_text,
        schema_slice: schema.clone(),
        sentences_used: used.len(),
        sentences_dropped: dropped,
    }
}

fn check_inputs(sentences: &[ScoredSentence], schema: &TraitSchema) -> Result<(), ExtractorError> {
    if schema.is_empty() {
        return Err(ExtractorError::EmptySchema);
    }
    if sentences.is_empty() {
        return Err(ExtractorError::NoSentences);
    }
    Ok(())
}

/// Renders the prompt with every sentence, failing if it exceeds the input budget.
pub fn build_prompt(
    species: &str,
    sentences: &[ScoredSentence],
    schema: &TraitSchema,
    budget: &PromptBudget,
) -> Result<PromptBundle, ExtractorError> {
    check_inputs(sentences, schema)?;
    let (ordered, _) = order_sentences(sentences);
    let b = bundle(species, &ordered, 0, schema);
    let estimated = b.estimated_tokens();
    if estimated > budget.input_limit() {
        return Err(ExtractorError::ContextOverflow {
            estimated,
            limit: budget.input_limit(),
        });
    }
    Ok(b)
}

/// Like [`build_prompt`] but drops the lowest-scoring sentences until the prompt fits.
pub fn fit_prompt(
    species: &str,
    sentences: &[ScoredSentence],
    schema: &TraitSchema,
    budget: &PromptBudget,
) -> Result<PromptBundle, ExtractorError> {
    check_inputs(sentences, schema)?;
    let (ordered, _) = order_sentences(sentences);
    let limit = budget.input_limit();
    let fits = |n: usize| bundle(species, &ordered[..n], ordered.len() - n, schema);
    let full = fits(ordered.len());
    if full.estimated_tokens() <= limit {
        return Ok(full);
    }
    // prompt length grows with n, so the largest fitting prefix is found by bisection
    let (mut lo, mut hi) = (0, ordered.len());
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if fits(mid).estimated_tokens() <= limit {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    if lo == 0 {
        return Err(ExtractorError::ContextOverflow {
            estimated: fits(1).estimated_tokens(),
            limit,
        });
    }
    let b = fits(lo);
    log::warn!(
        "{species}: dropped {} sentences to fit the context window",
        b.sentences_dropped
    );
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str, score: f64, url: &str) -> ScoredSentence {
        ScoredSentence::new("X y", url, text, score).unwrap()
    }

    fn schema() -> TraitSchema {
        TraitSchema::new(vec![
            ("Leaf", vec!["Simple", "Compound"]),
            ("Habit", vec!["Tree", "Hooker's vine"]),
        ])
        .unwrap()
    }

    #[test]
    fn schema_block_layout() {
        assert_eq!(
            render_schema_block(&schema()),
            "{\"Leaf\": ['Simple', 'Compound'],\n\"Habit\": ['Tree', 'Hooker\\'s vine']}"
        );
    }

    #[test]
    fn ordering_and_dedup() {
        let input = vec![
            s("B  one.", 0.6, "u2"),
            s("A two.", 0.9, "u1"),
            s("B one.", 0.7, "u1"),
            s("C.", 0.6, "u1"),
        ];
        let (ordered, dups) = order_sentences(&input);
        let texts: Vec<_> = ordered.iter().map(|x| x.sentence.as_str()).collect();
        assert_eq!(texts, ["A two.", "B one.", "C."]);
        assert_eq!(dups, 1);
    }

    #[test]
    fn single_trait_prompt_has_one_entry() {
        let one = schema().single("Habit").unwrap();
        let p = build_prompt("X y", &[s("A tree.", 0.9, "u")], &one, &PromptBudget::default()).unwrap();
        assert!(p.rendered.contains("{\"Habit\": ['Tree', 'Hooker\\'s vine']}"));
        assert!(!p.rendered.contains("\"Leaf\""));
    }

    #[test]
    fn preconditions() {
        let empty = schema().restrict(&[]);
        assert!(matches!(
            build_prompt("X y", &[s("A.", 0.9, "u")], &empty, &PromptBudget::default()),
            Err(ExtractorError::EmptySchema)
        ));
        assert!(matches!(
            build_prompt("X y", &[], &schema(), &PromptBudget::default()),
            Err(ExtractorError::NoSentences)
        ));
    }

    #[test]
    fn overflow_drops_lowest_scores() {
        let sentences: Vec<_> = (0..50)
            .map(|i| {
                s(
                    &format!("Sentence number {i} with padding text."),
                    i as f64 / 100.0,
                    "u",
                )
            })
            .collect();
        let base = estimate_tokens(&render_prompt("X y", "", &schema()));
        let budget = PromptBudget {
            context_limit: base + 100 + 10,
            output_reserve: 10,
        };
        assert!(matches!(
            build_prompt("X y", &sentences, &schema(), &budget),
            Err(ExtractorError::ContextOverflow { .. })
        ));
        let p = fit_prompt("X y", &sentences, &schema(), &budget).unwrap();
        assert!(p.estimated_tokens() <= budget.input_limit());
        assert!(p.sentences_used > 0 && p.sentences_dropped > 0);
        assert_eq!(p.sentences_used + p.sentences_dropped, 50);
        assert!(p.input_text.starts_with("Sentence number 49 "));
        let tight = PromptBudget {
            context_limit: base,
            output_reserve: 0,
        };
        assert!(fit_prompt("X y", &sentences, &schema(), &tight).is_err());
    }
}
