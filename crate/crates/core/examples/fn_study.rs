//! Run the false-negative study over expert verdicts with the offline model.
//!
//! Usage: cargo run --example fn_study -- [verdicts.csv]

use std::fs::File;
use std::path::{Path, PathBuf};

use florafill::evaluation::{binary_confusion, read_expert_rows, run_fn_study};
use florafill::extractor::{MockLlm, PromptBudget};
use florafill::TraitSchema;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let path: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| dir.join("fn_study.csv"));
    let rows = read_expert_rows(File::open(&path).expect("verdicts readable")).expect("verdicts parse");
    let schema = TraitSchema::load(dir.join("schema.json")).expect("schema loads");

    let records = run_fn_study(&rows, &schema, &MockLlm, None, &PromptBudget::default()).expect("study runs");
    for r in &records {
        println!(
            "{:<12} gt={} llm={} {}",
            r.trait_name, r.gt_found, r.llm_found, r.snippet
        );
    }
    print!("{}", binary_confusion(&records).expect("non-empty study").to_text());
}
