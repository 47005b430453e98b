//! Train the detector on the synthetic noisy corpus and compare β=0.2 with plain cross-entropy.
//!
//! Usage: cargo run --release --example train_synthetic -- [dim] [epochs] [seeds]

use std::time::Instant;

use florafill::detector::synthetic::{generate, SyntheticConfig};
use florafill::detector::{embed_spans, evaluate_examples, train_examples, HashedNgramProvider, TrainConfig};

fn main() {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let dim = args.first().copied().unwrap_or(1024);
    let epochs = args.get(1).copied().unwrap_or(5);
    let seeds = args.get(2).copied().unwrap_or(3) as u64;

    let provider = HashedNgramProvider::new(dim, 0);
    for seed in 0..seeds {
        let corpus = generate(&SyntheticConfig {
            seed,
            ..SyntheticConfig::default()
        });
        let train = embed_spans(&corpus.train, &provider);
        let test = embed_spans(&corpus.test, &provider);
        for beta in [0.2, 1.0] {
            let start = Instant::now();
            let cfg = TrainConfig {
                beta,
                epochs,
                seed,
                ..TrainConfig::default()
            };
            let (head, _) = train_examples(&train, &test, dim, &cfg).expect("training succeeds");
            let m = evaluate_examples(&head, &test, 0.5);
            println!(
                "seed {seed} beta {beta:.1}: clean F1 {:.4} (macro {:.4}) in {:.1?}",
                m.descriptive.f1,
                m.macro_f1(),
                start.elapsed()
            );
        }
    }
}
