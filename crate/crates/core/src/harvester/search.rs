use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{HarvestError, SearchHit};
use crate::http::{is_retriable_status, with_retries, Attempt, Backoff, HttpClient};
use crate::record::content_digest;

pub const SEARCH_API_URL_ENV: &str = "SEARCH_API_URL";
pub const SEARCH_API_KEY_ENV: &str = "SEARCH_API_KEY";

pub trait SearchBackend: Send + Sync {
    /// At most `limit` hits in rank order. No results is an empty list, not an error.
    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchHit>, HarvestError>;
}

impl<T: SearchBackend + ?Sized> SearchBackend for Arc<T> {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchHit>, HarvestError> {
        (**self).search(query, limit)
    }
}

/// Web-search JSON API client.
///
/// Requests `GET {endpoint}?key=..&q=..&num=..&start=..` and reads either
/// `items[].{link,title}` or `results[].{url,title}` from the response,
/// paging ten results at a time.
pub struct HttpSearchBackend {
    client: Arc<dyn HttpClient>,
    endpoint: String,
    api_key: String,
    backoff: Backoff,
}

const PAGE_SIZE: usize = 10;

impl HttpSearchBackend {
    pub fn new(
        client: Arc<dyn HttpClient>,
        endpoint: impl Into<String>,
        api_key: impl Into<String>,
        backoff: Backoff,
    ) -> Self {
        Self {
            client,
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            backoff,
        }
    }

    /// Reads the endpoint and key from `SEARCH_API_URL` and `SEARCH_API_KEY`.
    pub fn from_env(client: Arc<dyn HttpClient>, backoff: Backoff) -> Result<Self, HarvestError> {
        let endpoint = std::env::var(SEARCH_API_URL_ENV).map_err(|_| HarvestError::MissingEnv(SEARCH_API_URL_ENV))?;
        let key = std::env::var(SEARCH_API_KEY_ENV).map_err(|_| HarvestError::MissingEnv(SEARCH_API_KEY_ENV))?;
        Ok(Self::new(client, endpoint, key, backoff))
    }

    fn page(&self, query: &str, start: usize, num: usize) -> Result<Vec<(String, String)>, HarvestError> {
        let mut url = url::Url::parse(&self.endpoint).map_err(|e| HarvestError::SearchBackend {
            message: format!("bad endpoint {}: {e}", self.endpoint),
            retriable: false,
        })?;
        url.query_pairs_mut()
            .append_pair("key", &self.api_key)
            .append_pair("q", query)
            .append_pair("num", &num.to_string())
            .append_pair("start", &start.to_string());
        let resp = with_retries(&self.backoff, |_| match self.client.get(url.as_str(), &[]) {
            Err(e) => Attempt::Retry(HarvestError::SearchBackend {
                message: e.to_string(),
                retriable: true,
            }),
            Ok(r) if r.status >= 400 => {
                let retriable = is_retriable_status(r.status);
                let err = HarvestError::SearchBackend {
                    message: format!("status {}", r.status),
                    retriable,
                };
                if retriable {
                    Attempt::Retry(err)
                } else {
                    Attempt::Fail(err)
                }
            }
            Ok(r) => Attempt::Done(r),
        })?;
        let json: Value = serde_json::from_slice(&resp.body).map_err(|e| HarvestError::SearchBackend {
            message: format!("invalid JSON response: {e}"),
            retriable: false,
        })?;
        let items = json
            .get("items")
            .or_else(|| json.get("results"))
            .and_then(Value::as_array)
            .cloned()
            .unwrap_or_default();
        Ok(items
            .iter()
            .filter_map(|it| {
                let url = it.get("link").or_else(|| it.get("url"))?.as_str()?.to_string();
                let title = it.get("title").and_then(Value::as_str).unwrap_or("").to_string();
                Some((url, title))
            })
            .collect())
    }
}

impl SearchBackend for HttpSearchBackend {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchHit>, HarvestError> {
        let mut hits = Vec::new();
        while hits.len() < limit {
            let num = PAGE_SIZE.min(limit - hits.len());
            let page = self.page(query, hits.len() + 1, num)?;
            let done = page.len() < num;
            for (url, title) in page.into_iter().take(num) {
                hits.push(SearchHit {
                    rank: hits.len() + 1,
                    url,
                    title,
                });
            }
            if done {
                break;
            }
        }
        Ok(hits)
    }
}

#[derive(Serialize, Deserialize)]
struct CachedResult {
    query: String,
    day: NaiveDate,
    limit: usize,
    hits: Vec<SearchHit>,
}

/// Caches another backend's results on disk keyed by (query, day).
pub struct CachedSearch {
    inner: Box<dyn SearchBackend>,
    dir: PathBuf,
    today: Box<dyn Fn() -> NaiveDate + Send + Sync>,
}

impl CachedSearch {
    pub fn new(inner: Box<dyn SearchBackend>, dir: impl AsRef<Path>) -> Self {
        Self::with_clock(inner, dir, || Utc::now().date_naive())
    }

    pub fn with_clock(
        inner: Box<dyn SearchBackend>,
        dir: impl AsRef<Path>,
        today: impl Fn() -> NaiveDate + Send + Sync + 'static,
    ) -> Self {
        Self {
            inner,
            dir: dir.as_ref().to_path_buf(),
            today: Box::new(today),
        }
    }

    fn path(&self, query: &str, day: NaiveDate) -> PathBuf {
        let key = content_digest(format!("{query}\n{day}").as_bytes());
        self.dir.join(format!("{key}.json"))
    }
}

impl SearchBackend for CachedSearch {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchHit>, HarvestError> {
        let day = (self.today)();
        let path = self.path(query, day);
        if let Ok(bytes) = fs::read(&path) {
            if let Ok(c) = serde_json::from_slice::<CachedResult>(&bytes) {
                // a shorter cached list is complete only if the backend ran out of results
                if c.query == query && (c.limit >= limit || c.hits.len() < c.limit) {
                    return Ok(c.hits.into_iter().take(limit).collect());
                }
            }
        }
        let hits = self.inner.search(query, limit)?;
        let record = CachedResult {
            query: query.to_string(),
            day,
            limit,
            hits: hits.clone(),
        };
        let io = |e: std::io::Error| HarvestError::Cache(e.to_string());
        fs::create_dir_all(&self.dir).map_err(io)?;
        let json = serde_json::to_vec_pretty(&record).map_err(|e| HarvestError::Cache(e.to_string()))?;
        crate::fsutil::write_atomic(&path, &json).map_err(io)?;
        Ok(hits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl SearchBackend for Counting {
        fn search(&self, query: &str, limit: usize) -> Result<Vec<SearchHit>, HarvestError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok((1..=limit.min(3))
                .map(|rank| SearchHit {
                    rank,
                    url: format!("https://example.org/{query}/{rank}"),
                    title: String::new(),
                })
                .collect())
        }
    }

    #[test]
    fn cache_is_keyed_by_query_and_day() {
        let dir = tempfile::tempdir().unwrap();
        let day = Arc::new(std::sync::Mutex::new(NaiveDate::from_ymd_opt(2024, 5, 1).unwrap()));
        let d2 = day.clone();
        let inner = Arc::new(Counting(AtomicUsize::new(0)));
        let cached = CachedSearch::with_clock(Box::new(inner.clone()), dir.path(), move || *d2.lock().unwrap());
        let a = cached.search("\"Hedera helix\"", 20).unwrap();
        let b = cached.search("\"Hedera helix\"", 20).unwrap();
        assert_eq!(a, b);
        assert_eq!(inner.0.load(Ordering::SeqCst), 1);
        // backend had only 3 results, so a cached list still answers smaller and larger limits
        assert_eq!(cached.search("\"Hedera helix\"", 2).unwrap().len(), 2);
        assert_eq!(inner.0.load(Ordering::SeqCst), 1);
        cached.search("\"Albizia coriaria\"", 20).unwrap();
        assert_eq!(inner.0.load(Ordering::SeqCst), 2);
        *day.lock().unwrap() = NaiveDate::from_ymd_opt(2024, 5, 2).unwrap();
        cached.search("\"Hedera helix\"", 20).unwrap();
        assert_eq!(inner.0.load(Ordering::SeqCst), 3);
    }
}
