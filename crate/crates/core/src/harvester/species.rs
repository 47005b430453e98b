use std::collections::{BTreeMap, HashSet};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    build_query, header_filter, normalize_binomial, FetchedDocument, Fetcher, HarvestError, SearchBackend, SearchHit,
};
use crate::record::RawSentence;
use crate::weak_label::split_sentences;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarvestConfig {
    /// Search hits considered per species, applied before the header filter.
    pub url_limit: usize,
    /// Concurrent fetch workers. Requests to one host are always serialized.
    pub parallelism: usize,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        Self {
            url_limit: 20,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum UrlStatus {
    Kept,
    HeaderMismatch,
    Duplicate,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrlOutcome {
    pub rank: usize,
    pub url: String,
    #[serde(flatten)]
    pub status: UrlStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestReport {
    pub species: String,
    pub query: String,
    pub hits: Vec<SearchHit>,
    /// Documents passing the header filter, in rank order.
    pub documents: Vec<FetchedDocument>,
    pub outcomes: Vec<UrlOutcome>,
}

/// Searches for one species, fetches the hits and keeps pages naming it in their header.
///
/// Per-URL failures are recorded in `outcomes`; only search errors are returned.
pub fn harvest_species(
    binomial: &str,
    search: &dyn SearchBackend,
    fetcher: &Fetcher,
    cfg: &HarvestConfig,
) -> Result<HarvestReport, HarvestError> {
    let query = build_query(binomial)?;
    let name = normalize_binomial(binomial)?;
    let mut hits = search.search(&query, cfg.url_limit)?;
    hits.truncate(cfg.url_limit);

    let mut seen = HashSet::new();
    let mut by_host: BTreeMap<String, Vec<&SearchHit>> = BTreeMap::new();
    let mut outcomes: BTreeMap<usize, UrlOutcome> = BTreeMap::new();
    for hit in &hits {
        if !seen.insert(hit.url.as_str()) {
            outcomes.insert(hit.rank, outcome(hit, UrlStatus::Duplicate));
            continue;
        }
        let host = url::Url::parse(&hit.url)
            .ok()
            .and_then(|u| u.host_str().map(str::to_string))
            .unwrap_or_default();
        by_host.entry(host).or_default().push(hit);
    }

    let groups: Vec<Vec<&SearchHit>> = by_host.into_values().collect();
    let next = Mutex::new(0usize);
    let fetched: Mutex<Vec<(&SearchHit, Result<FetchedDocument, HarvestError>)>> = Mutex::new(Vec::new());
    let workers = cfg.parallelism.max(1).min(groups.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let group = {
                    let mut n = next.lock().unwrap();
                    let Some(g) = groups.get(*n) else { break };
                    *n += 1;
                    g
                };
                for hit in group {
                    let r = fetcher.fetch(&hit.url);
                    fetched.lock().unwrap().push((hit, r));
                }
            });
        }
    });

    let mut fetched = fetched.into_inner().unwrap();
    fetched.sort_by_key(|(hit, _)| hit.rank);
    let mut documents = Vec::new();
    for (hit, result) in fetched {
        let status = match result {
            Ok(doc) if header_filter(&doc, &name) => {
                documents.push(doc);
                UrlStatus::Kept
            }
            Ok(_) => UrlStatus::HeaderMismatch,
            Err(e) => {
                log::warn!("{name}: {e}");
                UrlStatus::Failed { error: e.to_string() }
            }
        };
        outcomes.insert(hit.rank, outcome(hit, status));
    }
    log::info!("{name}: {} of {} hits kept", documents.len(), hits.len());

    Ok(HarvestReport {
        species: binomial.trim().to_string(),
        query,
        hits,
        documents,
        outcomes: outcomes.into_values().collect(),
    })
}

fn outcome(hit: &SearchHit, status: UrlStatus) -> UrlOutcome {
    UrlOutcome {
        rank: hit.rank,
        url: hit.url.clone(),
        status,
    }
}

/// Splits a document's body into sentences, each line separately so block boundaries end sentences.
pub fn document_sentences(species: &str, doc: &FetchedDocument) -> Vec<RawSentence> {
    doc.body_text
        .lines()
        .flat_map(split_sentences)
        .map(|sentence| RawSentence {
            species: species.to_string(),
            url: doc.provenance.url.clone(),
            sentence,
            fetch_timestamp: doc.provenance.fetch_timestamp,
            content_hash: doc.provenance.content_hash.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harvester::{FetchConfig, MockSearchBackend, MockWeb};
    use std::fs;
    use std::sync::Arc;
    use std::time::Duration;

    fn corpus() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::write(
            p.join("ivy.html"),
            "<title>Hedera helix - Wikipedia</title><p>Leaves are alternate. Flowers greenish.</p>",
        )
        .unwrap();
        fs::write(
            p.join("control.html"),
            "<title>Ivy control methods</title><p>Pull it out.</p>",
        )
        .unwrap();
        fs::write(p.join("ivy.pdf"), "%PDF").unwrap();
        fs::write(
            p.join("heading.html"),
            "<title>Garden</title><h2>HEDERA HELIX</h2><p>Evergreen climber.</p>",
        )
        .unwrap();
        fs::write(
            p.join("index.json"),
            r#"{"\"Hedera helix\"": ["ivy.html", "control.html", "ivy.pdf", "missing.html", "ivy.html", "heading.html"]}"#,
        )
        .unwrap();
        dir
    }

    fn fetcher(dir: &std::path::Path) -> Fetcher {
        let cfg = FetchConfig {
            per_domain_delay: Duration::ZERO,
            backoff: crate::http::Backoff::none(),
            ..FetchConfig::default()
        };
        Fetcher::new(Arc::new(MockWeb::new(dir)), cfg, None)
    }

    #[test]
    fn keeps_only_header_matches_in_rank_order() {
        let dir = corpus();
        let search = MockSearchBackend::load(dir.path()).unwrap();
        let r = harvest_species(
            "Hedera helix L.",
            &search,
            &fetcher(dir.path()),
            &HarvestConfig::default(),
        )
        .unwrap();
        assert_eq!(r.query, "\"Hedera helix\"");
        let urls: Vec<_> = r.documents.iter().map(|d| d.provenance.url.as_str()).collect();
        assert_eq!(urls, ["https://mock.local/ivy.html", "https://mock.local/heading.html"]);
        let statuses: Vec<_> = r.outcomes.iter().map(|o| &o.status).collect();
        assert_eq!(statuses[0], &UrlStatus::Kept);
        assert_eq!(statuses[1], &UrlStatus::HeaderMismatch);
        assert!(matches!(statuses[2], UrlStatus::Failed { .. }));
        assert!(matches!(statuses[3], UrlStatus::Failed { .. }));
        assert_eq!(statuses[4], &UrlStatus::Duplicate);
        assert_eq!(r.outcomes.len(), 6);
    }

    #[test]
    fn cap_applies_before_filter() {
        let dir = corpus();
        let search = MockSearchBackend::load(dir.path()).unwrap();
        let cfg = HarvestConfig {
            url_limit: 2,
            parallelism: 1,
        };
        let r = harvest_species("Hedera helix", &search, &fetcher(dir.path()), &cfg).unwrap();
        assert_eq!(r.hits.len(), 2);
        assert_eq!(r.documents.len(), 1);
    }

    #[test]
    fn unknown_species_yields_nothing() {
        let dir = corpus();
        let search = MockSearchBackend::load(dir.path()).unwrap();
        let r = harvest_species(
            "Albizia coriaria",
            &search,
            &fetcher(dir.path()),
            &HarvestConfig::default(),
        )
        .unwrap();
        assert!(r.documents.is_empty() && r.hits.is_empty());
        assert!(harvest_species("Hedera", &search, &fetcher(dir.path()), &HarvestConfig::default()).is_err());
    }

    #[test]
    fn sentences_carry_provenance() {
        let dir = corpus();
        let search = MockSearchBackend::load(dir.path()).unwrap();
        let r = harvest_species("Hedera helix", &search, &fetcher(dir.path()), &HarvestConfig::default()).unwrap();
        let s = document_sentences("Hedera helix", &r.documents[0]);
        let texts: Vec<_> = s.iter().map(|s| s.sentence.as_str()).collect();
        assert_eq!(texts, ["Leaves are alternate.", "Flowers greenish."]);
        assert!(s.iter().all(|x| x.url == "https://mock.local/ivy.html"));
    }
}
