//! Harvest one species from the bundled mock web and show what happened to each search hit.
//!
//! Usage: cargo run --example harvest_mock -- ["Genus species"]

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use florafill::harvester::{
    document_sentences, harvest_species, FetchConfig, Fetcher, HarvestConfig, MockSearchBackend, MockWeb,
};

fn main() {
    let species = std::env::args().nth(1).unwrap_or_else(|| "Ficus aurea".into());
    let web = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo/mock_web");
    let search = MockSearchBackend::load(&web).expect("mock index loads");
    let cfg = FetchConfig {
        per_domain_delay: Duration::ZERO,
        ..FetchConfig::default()
    };
    let fetcher = Fetcher::new(Arc::new(MockWeb::new(&web)), cfg, None);

    let report = harvest_species(&species, &search, &fetcher, &HarvestConfig::default()).expect("search succeeds");
    println!("query {}", report.query);
    for o in &report.outcomes {
        println!("  #{} {} {:?}", o.rank, o.url, o.status);
    }
    for doc in &report.documents {
        for s in document_sentences(&species, doc) {
            println!("  | {}", s.sentence);
        }
    }
    println!("{} requests", fetcher.request_count());
}
