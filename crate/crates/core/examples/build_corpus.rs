//! Weakly label the bundled training pages by section header and print the split sizes.

use std::path::Path;

use florafill::weak_label::{build_corpus, read_documents, CorpusConfig, HeaderRules};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let docs = read_documents(dir.join("training_documents.jsonl")).expect("documents load");
    let random = read_documents(dir.join("random_documents.jsonl")).expect("documents load");
    let cfg = CorpusConfig {
        train_sources: vec!["wikipedia".into(), "powo".into()],
        ..CorpusConfig::default()
    };
    let corpus = build_corpus(&docs, &random, &HeaderRules::defaults(), &cfg);
    let stats = corpus.stats();
    for (name, c) in [("train", stats.train), ("val", stats.val), ("test", stats.test)] {
        println!("{name:>5}: {c:?}");
    }
    if let Some(span) = corpus.train.first() {
        println!("first span: {span:?}");
    }
}
