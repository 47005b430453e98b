//! Render the extraction prompt for a species from a few descriptive sentences.

use std::path::Path;

use florafill::extractor::{build_prompt, PromptBudget};
use florafill::{ScoredSentence, TraitSchema};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let schema = TraitSchema::load(dir.join("schema.json")).expect("schema loads");
    let sentences: Vec<ScoredSentence> = [
        ("It is a large climbing plant with aerial roots.", 0.97),
        ("The leaves are alternate and lobed.", 0.93),
    ]
    .iter()
    .filter_map(|(s, q)| ScoredSentence::new("Hedera helix", "https://example.org/hedera", s, *q))
    .collect();
    let bundle = build_prompt("Hedera helix", &sentences, &schema, &PromptBudget::default()).expect("prompt fits");
    println!("{}", bundle.rendered);
    println!(
        "-- ~{} tokens, {} sentences",
        bundle.estimated_tokens(),
        bundle.sentences_used
    );
}
