//! Train a detector on the bundled corpus, then score sentences given on the command line.
//!
//! Usage: cargo run --release --example score_sentences -- "The leaves are alternate." ...

use std::path::Path;

use florafill::detector::{train, Detector, HashedNgramProvider, TrainConfig, DEFAULT_THRESHOLD};
use florafill::weak_label::{build_corpus, read_documents, CorpusConfig, HeaderRules};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let docs = read_documents(dir.join("training_documents.jsonl")).expect("documents load");
    let random = read_documents(dir.join("random_documents.jsonl")).expect("documents load");
    let corpus = build_corpus(&docs, &random, &HeaderRules::defaults(), &CorpusConfig::default());

    let provider = HashedNgramProvider::new(4096, 0);
    let head = train(
        &corpus.train,
        &provider,
        &TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        },
    )
    .expect("training succeeds");
    let detector = Detector::new(Box::new(provider), head, DEFAULT_THRESHOLD).expect("dimensions agree");

    let mut sentences: Vec<String> = std::env::args().skip(1).collect();
    if sentences.is_empty() {
        sentences = vec![
            "The leaves are alternate.".into(),
            "Metropolitan France was settled during the Iron Age by Celtic tribes.".into(),
        ];
    }
    for s in &sentences {
        let q = detector.score(s);
        let verdict = if q >= detector.threshold {
            "descriptive"
        } else {
            "other"
        };
        println!("{q:.3} {verdict:<11} {s}");
    }
}
