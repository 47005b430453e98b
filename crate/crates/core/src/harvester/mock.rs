//! File-backed search backend and web used for offline runs.
//!
//! A mock corpus directory holds HTML (and other) files plus `index.json`,
//! which maps each query string to its ranked result list:
//!
//! ```json
//! { "\"Hedera helix\"": [ {"file": "ivy.html", "title": "Hedera helix"}, "other.html" ] }
//! ```
//!
//! File `f` is served at `https://mock.local/f`; an optional `robots.txt`
//! in the directory is served as the host's robots file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::{HarvestError, SearchHit};
use crate::harvester::SearchBackend;
use crate::http::{HttpClient, HttpResponse, TransportError};

pub const MOCK_HOST: &str = "mock.local";

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum IndexEntry {
    File(String),
    Detailed {
        file: String,
        #[serde(default)]
        title: Option<String>,
    },
}

impl IndexEntry {
    fn file(&self) -> &str {
        match self {
            IndexEntry::File(f) | IndexEntry::Detailed { file: f, .. } => f,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockSearchBackend {
    index: BTreeMap<String, Vec<IndexEntry>>,
}

impl MockSearchBackend {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, HarvestError> {
        let path = dir.as_ref().join("index.json");
        let text = fs::read_to_string(&path).map_err(|e| HarvestError::SearchBackend {
            message: format!("{}: {e}", path.display()),
            retriable: false,
        })?;
        let index = serde_json::from_str(&text).map_err(|e| HarvestError::SearchBackend {
            message: format!("{}: {e}", path.display()),
            retriable: false,
        })?;
        Ok(Self { index })
    }
}

impl SearchBackend for MockSearchBackend {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchHit>, HarvestError> {
        let Some(entries) = self.index.get(query) else {
            return Ok(Vec::new());
        };
        Ok(entries
            .iter()
            .take(limit)
            .enumerate()
            .map(|(i, e)| SearchHit {
                rank: i + 1,
                url: format!("https://{MOCK_HOST}/{}", e.file()),
                title: match e {
                    IndexEntry::Detailed { title: Some(t), .. } => t.clone(),
                    _ => e.file().to_string(),
                },
            })
            .collect())
    }
}

/// Serves a directory as `https://mock.local/`. Every response carries the Unix epoch as its timestamp.
#[derive(Debug, Clone)]
pub struct MockWeb {
    root: PathBuf,
}

impl MockWeb {
    pub fn new(root: impl AsRef<Path>) -> Self {
        Self {
            root: root.as_ref().to_path_buf(),
        }
    }
}

fn media_type_for(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("html") | Some("htm") => "text/html; charset=utf-8",
        Some("txt") => "text/plain; charset=utf-8",
        Some("pdf") => "application/pdf",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    }
}

impl HttpClient for MockWeb {
    fn get(&self, url: &str, _headers: &[(&str, &str)]) -> Result<HttpResponse, TransportError> {
        let parsed = url::Url::parse(url).map_err(|e| TransportError(e.to_string()))?;
        if parsed.host_str() != Some(MOCK_HOST) {
            return Err(TransportError(format!("offline: no route to {url}")));
        }
        let rel = parsed.path().trim_start_matches('/');
        if rel.is_empty() || rel.split('/').any(|seg| seg == "..") {
            return Ok(not_found());
        }
        let path = self.root.join(rel);
        match fs::read(&path) {
            Ok(body) => Ok(HttpResponse {
                status: 200,
                content_type: Some(media_type_for(&path).to_string()),
                body,
            }),
            Err(_) => Ok(not_found()),
        }
    }

    fn post_json(&self, url: &str, _headers: &[(&str, &str)], _body: &str) -> Result<HttpResponse, TransportError> {
        Err(TransportError(format!(
            "offline: POST to {url} is not served by the mock web"
        )))
    }

    fn now(&self) -> DateTime<Utc> {
        DateTime::UNIX_EPOCH
    }
}

fn not_found() -> HttpResponse {
    HttpResponse {
        status: 404,
        content_type: Some("text/plain".into()),
        body: b"not found".to_vec(),
    }
}
