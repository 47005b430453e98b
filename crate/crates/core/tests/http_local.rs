//! Network clients against a throwaway server on the loopback interface.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use florafill::extractor::{ExtractorError, HttpChatBackend, LlmBackend, LlmClientConfig};
use florafill::harvester::{FetchConfig, Fetcher, HarvestError, HttpSearchBackend, SearchBackend};
use florafill::http::{Backoff, HttpClient, UreqClient};

#[derive(Debug, Clone)]
struct Request {
    method: String,
    path: String,
    headers: HashMap<String, String>,
    body: String,
}

struct Reply {
    status: u16,
    content_type: &'static str,
    body: String,
}

fn reply(status: u16, content_type: &'static str, body: impl Into<String>) -> Reply {
    Reply {
        status,
        content_type,
        body: body.into(),
    }
}

/// Serves `route` on a fresh port until the test process exits; returns the base URL and request log.
fn serve(route: impl Fn(&Request, usize) -> Reply + Send + 'static) -> (String, Arc<Mutex<Vec<Request>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = log.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            if reader.read_line(&mut line).is_err() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (method, path) = (
                parts.next().unwrap_or("").to_string(),
                parts.next().unwrap_or("").to_string(),
            );
            let mut headers = HashMap::new();
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                let h = h.trim_end();
                if h.is_empty() {
                    break;
                }
                if let Some((k, v)) = h.split_once(':') {
                    headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
                }
            }
            let len: usize = headers.get("content-length").and_then(|v| v.parse().ok()).unwrap_or(0);
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let req = Request {
                method,
                path,
                headers,
                body: String::from_utf8(body).unwrap(),
            };
            let n = {
                let mut log = seen.lock().unwrap();
                log.push(req.clone());
                log.len()
            };
            let r = route(&req, n);
            let head = format!(
                "HTTP/1.1 {} X\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                r.status,
                r.content_type,
                r.body.len()
            );
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(r.body.as_bytes());
        }
    });
    (base, log)
}

fn client() -> Arc<dyn HttpClient> {
    Arc::new(UreqClient::new("florafill-test", Duration::from_secs(5)))
}

fn chat_config(base: &str, key_env: &str) -> LlmClientConfig {
    LlmClientConfig {
        endpoint_url: format!("{base}/v1/chat/completions"),
        api_key_env_name: key_env.into(),
        model_id: "test-model".into(),
        max_retries: 2,
        backoff_base: Duration::from_millis(1),
        ..LlmClientConfig::default()
    }
}

const COMPLETION: &str = r#"{"choices":[{"message":{"role":"assistant","content":"{\"Plant type\": [(\"Tree\", 1)]}"}}],"usage":{"prompt_tokens":12,"completion_tokens":7}}"#;

#[test]
fn ureq_client_reports_status_and_media_type() {
    let (base, log) = serve(|req, _| match req.path.as_str() {
        "/ok" => reply(200, "text/html; charset=utf-8", "<html></html>"),
        _ => reply(404, "text/plain", "nope"),
    });
    let c = client();
    let ok = c.get(&format!("{base}/ok"), &[("X-Probe", "1")]).unwrap();
    assert_eq!((ok.status, ok.media_type().as_deref()), (200, Some("text/html")));
    assert_eq!(ok.text(), "<html></html>");
    assert_eq!(c.get(&format!("{base}/gone"), &[]).unwrap().status, 404);
    assert_eq!(log.lock().unwrap()[0].headers["x-probe"], "1");
}

#[test]
fn chat_backend_retries_throttling_and_sends_the_key() {
    let (base, log) = serve(|_, n| {
        if n == 1 {
            reply(429, "application/json", "{}")
        } else {
            reply(200, "application/json", COMPLETION)
        }
    });
    std::env::set_var("FLORAFILL_TEST_CHAT_KEY", "sekret");
    let backend = HttpChatBackend::new(client(), chat_config(&base, "FLORAFILL_TEST_CHAT_KEY")).unwrap();
    let done = backend.complete("hello plant").unwrap();
    assert_eq!(done.text, r#"{"Plant type": [("Tree", 1)]}"#);
    assert_eq!((done.input_tokens, done.output_tokens), (12, 7));

    let log = log.lock().unwrap();
    assert_eq!(log.len(), 2);
    let req = &log[1];
    assert_eq!(
        (req.method.as_str(), req.path.as_str()),
        ("POST", "/v1/chat/completions")
    );
    assert_eq!(req.headers["authorization"], "Bearer sekret");
    let body: serde_json::Value = serde_json::from_str(&req.body).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["content"], "hello plant");
}

#[test]
fn chat_backend_gives_up_on_client_errors() {
    let (base, log) = serve(|_, _| reply(400, "application/json", r#"{"error":"bad"}"#));
    let backend = HttpChatBackend::new(client(), chat_config(&base, "FLORAFILL_TEST_UNSET_KEY")).unwrap();
    match backend.complete("x") {
        Err(e @ ExtractorError::LlmTransport { .. }) => assert!(e.to_string().contains(&base), "{e}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(log.lock().unwrap().len(), 1);
    assert!(!log.lock().unwrap()[0].headers.contains_key("authorization"));
}

#[test]
fn chat_backend_treats_empty_answers_as_refusals() {
    let (base, _) = serve(|_, _| reply(200, "application/json", r#"{"choices":[{"message":{"content":"  "}}]}"#));
    let backend = HttpChatBackend::new(client(), chat_config(&base, "FLORAFILL_TEST_UNSET_KEY")).unwrap();
    assert!(matches!(backend.complete("x"), Err(ExtractorError::LlmRefusal { .. })));
}

#[test]
fn fetcher_honours_robots_and_skips_non_html() {
    let (base, log) = serve(|req, _| match req.path.as_str() {
        "/robots.txt" => reply(200, "text/plain", "User-agent: *\nDisallow: /private/\n"),
        "/species" => reply(
            200,
            "text/html",
            "<html><head><title>Hedera helix</title></head><body><p>Leaves lobed. Stems climbing.</p></body></html>",
        ),
        "/paper.pdf" => reply(200, "application/pdf", "%PDF-1.4"),
        _ => reply(404, "text/plain", ""),
    });
    let cfg = FetchConfig {
        per_domain_delay: Duration::ZERO,
        backoff: Backoff::none(),
        ..FetchConfig::default()
    };
    let fetcher = Fetcher::new(client(), cfg, None);

    let doc = fetcher.fetch(&format!("{base}/species")).unwrap();
    assert_eq!(doc.http_status, 200);
    assert!(doc.header_text.contains("Hedera helix"));
    assert!(doc.body_text.contains("Leaves lobed."));
    assert!(matches!(
        fetcher.fetch(&format!("{base}/private/x")),
        Err(HarvestError::SkippedByPolicy { .. })
    ));
    assert!(matches!(
        fetcher.fetch(&format!("{base}/paper.pdf")),
        Err(HarvestError::SkippedNonHtml { .. })
    ));
    assert!(matches!(
        fetcher.fetch(&format!("{base}/missing")),
        Err(HarvestError::Fetch { .. })
    ));
    fetcher.fetch(&format!("{base}/species")).unwrap();

    let paths: Vec<String> = log.lock().unwrap().iter().map(|r| r.path.clone()).collect();
    assert_eq!(paths, ["/robots.txt", "/species", "/paper.pdf", "/missing"]);
    assert_eq!(fetcher.request_count(), 4);
    assert!(log
        .lock()
        .unwrap()
        .iter()
        .all(|r| r.headers["user-agent"].starts_with("florafill/")));
}

#[test]
fn search_backend_sends_query_and_key() {
    let (base, log) = serve(|_, _| {
        reply(
            200,
            "application/json",
            r#"{"items":[{"link":"https://a.org/1","title":"One"},{"link":"https://b.org/2","title":"Two"}]}"#,
        )
    });
    let search = HttpSearchBackend::new(client(), format!("{base}/search"), "k123", Backoff::none());
    let hits = search.search("\"Hedera helix\"", 10).unwrap();
    assert_eq!(
        hits.iter().map(|h| (h.rank, h.url.as_str())).collect::<Vec<_>>(),
        [(1, "https://a.org/1"), (2, "https://b.org/2")]
    );

    let req = log.lock().unwrap()[0].clone();
    let url = url::Url::parse(&format!("{base}{}", req.path)).unwrap();
    let q: HashMap<_, _> = url.query_pairs().into_owned().collect();
    assert_eq!(q["key"], "k123");
    assert_eq!(q["q"], "\"Hedera helix\"");
    assert_eq!(q["start"], "1");
}
