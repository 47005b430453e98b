//! Parse a model answer (a file, or the bundled example) into a matrix row.
//!
//! Usage: cargo run --example parse -- [response.txt]

use std::path::Path;

use florafill::extractor::parse_response;
use florafill::TraitSchema;

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let path = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| fixtures.join("prompts/golden_response.txt"));
    let text = std::fs::read_to_string(&path).expect("response readable");
    let schema = TraitSchema::load(fixtures.join("demo/schema.json")).expect("schema loads");

    let parsed = parse_response(&text, &schema).expect("answer contains a dictionary");
    for e in &parsed.evidence {
        let present: Vec<&str> = e.values.iter().filter(|(_, p)| *p).map(|(v, _)| v.as_str()).collect();
        println!(
            "{}: {}",
            e.trait_name,
            if present.is_empty() {
                "NA".to_string()
            } else {
                present.join(", ")
            }
        );
    }
    println!("hallucinated {} malformed {}", parsed.hallucinations, parsed.malformed);
}
