use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::html;
use super::robots::RobotsRules;
use super::{FetchedDocument, HarvestError};
use crate::fsutil::write_atomic;
use crate::http::{is_retriable_status, with_retries, Attempt, Backoff, HttpClient, HttpResponse, DEFAULT_USER_AGENT};
use crate::record::{content_digest, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchConfig {
    pub user_agent: String,
    pub backoff: Backoff,
    /// Minimum spacing between two requests to the same host.
    #[serde(with = "crate::http::millis")]
    pub per_domain_delay: Duration,
    pub respect_robots: bool,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            user_agent: DEFAULT_USER_AGENT.to_string(),
            backoff: Backoff::default(),
            per_domain_delay: Duration::from_millis(1000),
            respect_robots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    /// Hex SHA-256 of the body, also its file name in the object store.
    pub digest: String,
    pub timestamp: DateTime<Utc>,
    pub status: u16,
    pub media_type: String,
}

/// Content-addressed store of fetched bodies with a JSON index `url → entry`.
pub struct RawCache {
    dir: PathBuf,
    index: Mutex<BTreeMap<String, CacheEntry>>,
}

impl RawCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, HarvestError> {
        let dir = dir.as_ref().to_path_buf();
        let index_path = dir.join("index.json");
        let index = match fs::read(&index_path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| HarvestError::Cache(format!("{}: {e}", index_path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(HarvestError::Cache(e.to_string())),
        };
        Ok(Self {
            dir,
            index: Mutex::new(index),
        })
    }

    fn object_path(&self, digest: &str) -> PathBuf {
        self.dir.join("objects").join(&digest[..2]).join(digest)
    }

    pub fn get(&self, url: &str) -> Option<(CacheEntry, Vec<u8>)> {
        let entry = self.index.lock().unwrap().get(url).cloned()?;
        let body = fs::read(self.object_path(&entry.digest)).ok()?;
        // a corrupted object is treated as a miss
        (content_digest(&body) == entry.digest).then_some((entry, body))
    }

    pub fn put(&self, url: &str, entry: CacheEntry, body: &[u8]) -> Result<(), HarvestError> {
        let io = |e: std::io::Error| HarvestError::Cache(e.to_string());
        let obj = self.object_path(&entry.digest);
        if !obj.exists() {
            write_atomic(&obj, body).map_err(io)?;
        }
        let mut index = self.index.lock().unwrap();
        index.insert(url.to_string(), entry);
        let json = serde_json::to_vec_pretty(&*index).map_err(|e| HarvestError::Cache(e.to_string()))?;
        write_atomic(&self.dir.join("index.json"), &json).map_err(io)
    }

    pub fn len(&self) -> usize {
        self.index.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

type FetchResult = Result<FetchedDocument, HarvestError>;

/// Polite page fetcher: robots.txt, per-host spacing, retries, caching.
pub struct Fetcher {
    client: Arc<dyn HttpClient>,
    cfg: FetchConfig,
    cache: Option<RawCache>,
    robots: Mutex<HashMap<String, RobotsRules>>,
    memo: Mutex<HashMap<String, FetchResult>>,
    next_slot: Mutex<HashMap<String, Instant>>,
    requests: AtomicUsize,
}

impl Fetcher {
    pub fn new(client: Arc<dyn HttpClient>, cfg: FetchConfig, cache: Option<RawCache>) -> Self {
        Self {
            client,
            cfg,
            cache,
            robots: Mutex::new(HashMap::new()),
            memo: Mutex::new(HashMap::new()),
            next_slot: Mutex::new(HashMap::new()),
            requests: AtomicUsize::new(0),
        }
    }

    /// Network requests issued so far, robots.txt included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Blocks until this host's next request slot.
    fn wait_turn(&self, host: &str) {
        let wait = {
            let mut slots = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let slot = slots.get(host).copied().filter(|&t| t > now).unwrap_or(now);
            slots.insert(host.to_string(), slot + self.cfg.per_domain_delay);
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }

    fn request(&self, host: &str, url: &str) -> Result<HttpResponse, crate::http::TransportError> {
        self.wait_turn(host);
        self.requests.fetch_add(1, Ordering::SeqCst);
        self.client.get(url, &[("User-Agent", self.cfg.user_agent.as_str())])
    }

    fn robots_for(&self, origin: &str, host: &str) -> RobotsRules {
        if let Some(r) = self.robots.lock().unwrap().get(origin) {
            return r.clone();
        }
        let url = format!("{origin}/robots.txt");
        let rules = match self.request(host, &url) {
            Ok(r) if r.status == 200 => RobotsRules::parse(&r.text()),
            // missing or unreachable robots.txt: no restrictions
            _ => RobotsRules::allow_all(),
        };
        self.robots.lock().unwrap().insert(origin.to_string(), rules.clone());
        rules
    }

    pub fn fetch(&self, url: &str) -> FetchResult {
        if let Some(r) = self.memo.lock().unwrap().get(url) {
            return r.clone();
        }
        let result = self.fetch_uncached(url);
        self.memo.lock().unwrap().insert(url.to_string(), result.clone());
        result
    }

    fn fetch_uncached(&self, url: &str) -> FetchResult {
        let parsed = url::Url::parse(url).map_err(|e| HarvestError::InvalidUrl {
            url: url.to_string(),
            reason: e.to_string(),
        })?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(HarvestError::InvalidUrl {
                url: url.to_string(),
                reason: "only http(s) is supported".into(),
            });
        }
        let host = parsed.host_str().unwrap_or_default().to_string();

        if let Some((entry, body)) = self.cache.as_ref().and_then(|c| c.get(url)) {
            log::debug!("cache hit {url}");
            return build_document(url, entry.timestamp, entry.status, &entry.media_type, &body);
        }

        if self.cfg.respect_robots {
            let origin = parsed.origin().ascii_serialization();
            let mut path = parsed.path().to_string();
            if let Some(q) = parsed.query() {
                path.push('?');
                path.push_str(q);
            }
            if !self.robots_for(&origin, &host).is_allowed(&self.cfg.user_agent, &path) {
                return Err(HarvestError::SkippedByPolicy { url: url.to_string() });
            }
        }

        let fetch_err = |message: String| HarvestError::Fetch {
            url: url.to_string(),
            message,
        };
        let resp = with_retries(&self.cfg.backoff, |_| match self.request(&host, url) {
            Err(e) => Attempt::Retry(fetch_err(e.to_string())),
            Ok(r) if r.status >= 400 => {
                let e = fetch_err(format!("HTTP status {}", r.status));
                if is_retriable_status(r.status) {
                    Attempt::Retry(e)
                } else {
                    Attempt::Fail(e)
                }
            }
            Ok(r) => Attempt::Done(r),
        })?;

        let media_type = resp.media_type().unwrap_or_else(|| sniff(&resp.body).to_string());
        let timestamp = self.client.now();
        if let Some(cache) = &self.cache {
            let entry = CacheEntry {
                digest: content_digest(&resp.body),
                timestamp,
                status: resp.status,
                media_type: media_type.clone(),
            };
            cache.put(url, entry, &resp.body)?;
        }
        build_document(url, timestamp, resp.status, &media_type, &resp.body)
    }
}

fn is_html(media_type: &str) -> bool {
    matches!(media_type, "text/html" | "application/xhtml+xml")
}

fn sniff(body: &[u8]) -> &'static str {
    let head = String::from_utf8_lossy(&body[..body.len().min(512)])
        .trim_start()
        .to_ascii_lowercase();
    if head.starts_with("<!doctype html") || head.starts_with("<html") {
        "text/html"
    } else {
        "application/octet-stream"
    }
}

fn build_document(url: &str, timestamp: DateTime<Utc>, status: u16, media_type: &str, body: &[u8]) -> FetchResult {
    if !is_html(media_type) {
        return Err(HarvestError::SkippedNonHtml {
            url: url.to_string(),
            media_type: media_type.to_string(),
        });
    }
    let text = String::from_utf8_lossy(body);
    let extracted = html::extract(&text);
    Ok(FetchedDocument {
        provenance: Provenance::new(url, timestamp, body),
        http_status: status,
        media_type: media_type.to_string(),
        header_text: extracted.header_text(),
        body_text: extracted.body_text,
    })
}
