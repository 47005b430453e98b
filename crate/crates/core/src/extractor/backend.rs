use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::parse::{first_object, render_response, Loose, TraitEvidence};
use super::prompt::{estimate_tokens, PromptBudget, INPUT_HEADING, SCHEMA_HEADING};
use super::ExtractorError;
use crate::http::{is_retriable_status, with_retries, Attempt, Backoff, HttpClient};
use crate::text::match_key;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub input_tokens: usize,
    pub output_tokens: usize,
}

/// A chat-completion model: prompt in, raw answer out.
pub trait LlmBackend: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<Completion, ExtractorError>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for Arc<T> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn complete(&self, prompt: &str) -> Result<Completion, ExtractorError> {
        (**self).complete(prompt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmClientConfig {
    pub endpoint_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env_name: String,
    pub model_id: String,
    pub temperature: f64,
    /// Sent when set; not every API honours it.
    pub seed: Option<u64>,
    pub max_retries: u32,
    #[serde(with = "crate::http::millis")]
    pub backoff_base: Duration,
    #[serde(with = "crate::http::millis")]
    pub timeout: Duration,
    pub context_limit: usize,
    pub output_reserve: usize,
    /// Global throttle shared by all workers; 0 disables it.
    pub requests_per_minute: u32,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self::preset("mistral-medium").unwrap()
    }
}

impl LlmClientConfig {
    /// Ready-made settings for the supported hosted models.
    pub fn preset(name: &str) -> Option<Self> {
        let (endpoint, env, model) = match name {
            "mistral-medium" => (
                "https://api.mistral.ai/v1/chat/completions",
                "MISTRAL_API_KEY",
                "mistral-medium",
            ),
            "mixtral-8x22b" => (
                "https://api.mistral.ai/v1/chat/completions",
                "MISTRAL_API_KEY",
                "open-mixtral-8x22b",
            ),
            "gpt-3.5-turbo" => (
                "https://api.openai.com/v1/chat/completions",
                "OPENAI_API_KEY",
                "gpt-3.5-turbo",
            ),
            _ => return None,
        };
        let budget = PromptBudget::default();
        Some(Self {
            endpoint_url: endpoint.into(),
            api_key_env_name: env.into(),
            model_id: model.into(),
            temperature: 0.0,
            seed: Some(0),
            max_retries: 3,
            backoff_base: Duration::from_secs(1),
            timeout: Duration::from_secs(120),
            context_limit: budget.context_limit,
            output_reserve: budget.output_reserve,
            requests_per_minute: 0,
        })
    }

    pub fn validate(&self) -> Result<(), ExtractorError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ExtractorError::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.context_limit == 0 {
            return Err(ExtractorError::Config("context_limit must be positive".into()));
        }
        if self.output_reserve >= self.context_limit {
            return Err(ExtractorError::Config(
                "output_reserve must be below context_limit".into(),
            ));
        }
        Ok(())
    }

    pub fn budget(&self) -> PromptBudget {
        PromptBudget {
            context_limit: self.context_limit,
            output_reserve: self.output_reserve,
        }
    }

    pub fn backoff(&self) -> Backoff {
        Backoff {
            base: self.backoff_base,
            factor: 2.0,
            max_retries: self.max_retries,
        }
    }
}

/// OpenAI-style chat-completion endpoint.
pub struct HttpChatBackend {
    client: Arc<dyn HttpClient>,
    cfg: LlmClientConfig,
    api_key: Option<String>,
    next_slot: Mutex<Instant>,
}

impl HttpChatBackend {
    /// Reads the API key from the configured environment variable, if set.
    pub fn new(client: Arc<dyn HttpClient>, cfg: LlmClientConfig) -> Result<Self, ExtractorError> {
        cfg.validate()?;
        let api_key = std::env::var(&cfg.api_key_env_name).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!(
                "{} is not set; requests to {} go out unauthenticated",
                cfg.api_key_env_name,
                cfg.endpoint_url
            );
        }
        Ok(Self {
            client,
            cfg,
            api_key,
            next_slot: Mutex::new(Instant::now()),
        })
    }

    fn throttle(&self) {
        if self.cfg.requests_per_minute == 0 {
            return;
        }
        let gap = Duration::from_secs(60) / self.cfg.requests_per_minute;
        let wait = {
            let mut slot = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let start = (*slot).max(now);
            *slot = start + gap;
            start - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }

    fn request_body(&self, prompt: &str) -> String {
        let mut body = json!({
            "model": self.cfg.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        });
        if let Some(seed) = self.cfg.seed {
            body["seed"] = json!(seed);
        }
        body.to_string()
    }
}

impl LlmBackend for HttpChatBackend {
    fn model_id(&self) -> &str {
        &self.cfg.model_id
    }

    fn complete(&self, prompt: &str) -> Result<Completion, ExtractorError> {
        let body = self.request_body(prompt);
        let auth = self.api_key.as_ref().map(|k| format!("Bearer {k}"));
        let headers: Vec<(&str, &str)> = auth.iter().map(|a| ("Authorization", a.as_str())).collect();
        let endpoint = &self.cfg.endpoint_url;
        let transport = |message: String| ExtractorError::LlmTransport {
            endpoint: endpoint.clone(),
            message,
        };
        let resp = with_retries(&self.cfg.backoff(), |_| {
            self.throttle();
            match self.client.post_json(endpoint, &headers, &body) {
                Err(e) => Attempt::Retry(transport(e.to_string())),
                Ok(r) if is_retriable_status(r.status) => {
                    Attempt::Retry(transport(format!("HTTP status {}", r.status)))
                }
                Ok(r) if r.status >= 400 => Attempt::Fail(transport(format!("HTTP status {}: {}", r.status, r.text()))),
                Ok(r) => Attempt::Done(r),
            }
        })?;
        let json: Value = serde_json::from_slice(&resp.body).map_err(|e| transport(format!("invalid JSON: {e}")))?;
        let text = json
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string();
        if text.trim().is_empty() {
            return Err(ExtractorError::LlmRefusal {
                model_id: self.cfg.model_id.clone(),
            });
        }
        let usage = |k: &str| {
            json.pointer(&format!("/usage/{k}"))
                .and_then(Value::as_u64)
                .map(|n| n as usize)
        };
        Ok(Completion {
            input_tokens: usage("prompt_tokens").unwrap_or_else(|| estimate_tokens(prompt)),
            output_tokens: usage("completion_tokens").unwrap_or_else(|| estimate_tokens(&text)),
            text,
        })
    }
}

pub const MOCK_MODEL_ID: &str = "mock-substring-oracle";

/// Deterministic stand-in model: a value has evidence iff its case-folded
/// string occurs in the case-folded input text of the prompt.
#[derive(Debug, Clone, Default)]
pub struct MockLlm;

impl MockLlm {
    /// The oracle applied directly to text and schema, no prompt involved.
    pub fn oracle(input_text: &str, schema: &crate::schema::TraitSchema) -> Vec<TraitEvidence> {
        let haystack = match_key(input_text);
        schema
            .traits()
            .iter()
            .map(|t| TraitEvidence {
                trait_name: t.name().to_string(),
                values: t
                    .values()
                    .iter()
                    .map(|v| (v.clone(), haystack.contains(&match_key(v))))
                    .collect(),
            })
            .collect()
    }
}

/// Input text and dictionary block of a rendered prompt.
fn prompt_parts(prompt: &str) -> Option<(&str, Vec<(String, Loose)>)> {
    let input_start = prompt.find(INPUT_HEADING)? + INPUT_HEADING.len();
    let schema_at = prompt[input_start..].find(SCHEMA_HEADING)? + input_start;
    let input = prompt[input_start..schema_at].trim_matches('\n');
    let dict = first_object(&prompt[schema_at + SCHEMA_HEADING.len()..])?;
    Some((input, dict))
}

impl LlmBackend for MockLlm {
    fn model_id(&self) -> &str {
        MOCK_MODEL_ID
    }

    fn complete(&self, prompt: &str) -> Result<Completion, ExtractorError> {
        let Some((input, dict)) = prompt_parts(prompt) else {
            return Ok(Completion {
                text: "I cannot help with that.".into(),
                input_tokens: estimate_tokens(prompt),
                output_tokens: 6,
            });
        };
        let haystack = match_key(input);
        let evidence: Vec<TraitEvidence> = dict
            .into_iter()
            .map(|(name, values)| {
                let values = match values {
                    Loose::List(items) => items
                        .into_iter()
                        .filter_map(|v| match v {
                            Loose::Str(s) => Some(s),
                            _ => None,
                        })
                        .map(|v| {
                            let hit = haystack.contains(&match_key(&v));
                            (v, hit)
                        })
                        .collect(),
                    _ => Vec::new(),
                };
                TraitEvidence {
                    trait_name: name,
                    values,
                }
            })
            .collect();
        let text = render_response(&evidence);
        Ok(Completion {
            input_tokens: estimate_tokens(prompt),
            output_tokens: estimate_tokens(&text),
            text,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::{build_prompt, parse_response};
    use crate::http::{HttpResponse, TransportError};
    use crate::record::ScoredSentence;
    use crate::schema::TraitSchema;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Scripted {
        replies: Mutex<Vec<Result<HttpResponse, TransportError>>>,
        calls: AtomicUsize,
        last_body: Mutex<String>,
    }

    impl HttpClient for Scripted {
        fn get(&self, _: &str, _: &[(&str, &str)]) -> Result<HttpResponse, TransportError> {
            unreachable!()
        }

        fn post_json(&self, _: &str, _: &[(&str, &str)], body: &str) -> Result<HttpResponse, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            *self.last_body.lock().unwrap() = body.to_string();
            let mut r = self.replies.lock().unwrap();
            if r.len() > 1 {
                r.remove(0)
            } else {
                r[0].clone()
            }
        }
    }

    fn reply(status: u16, body: Value) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse {
            status,
            content_type: Some("application/json".into()),
            body: body.to_string().into_bytes(),
        })
    }

    fn backend(replies: Vec<Result<HttpResponse, TransportError>>) -> (Arc<Scripted>, HttpChatBackend) {
        let client = Arc::new(Scripted {
            replies: Mutex::new(replies),
            calls: AtomicUsize::new(0),
            last_body: Mutex::new(String::new()),
        });
        let cfg = LlmClientConfig {
            backoff_base: Duration::from_millis(1),
            api_key_env_name: "FLORAFILL_TEST_UNSET_KEY".into(),
            ..LlmClientConfig::default()
        };
        (client.clone(), HttpChatBackend::new(client, cfg).unwrap())
    }

    #[test]
    fn chat_request_and_response() {
        let ok =
            json!({"choices": [{"message": {"content": "{}"}}], "usage": {"prompt_tokens": 7, "completion_tokens": 1}});
        let (client, b) = backend(vec![
            Err(TransportError("reset".into())),
            reply(429, json!({})),
            reply(200, ok),
        ]);
        let c = b.complete("hello").unwrap();
        assert_eq!(c.text, "{}");
        assert_eq!((c.input_tokens, c.output_tokens), (7, 1));
        assert_eq!(client.calls.load(Ordering::SeqCst), 3);
        let sent: Value = serde_json::from_str(&client.last_body.lock().unwrap()).unwrap();
        assert_eq!(sent["messages"][0]["content"], "hello");
        assert_eq!(sent["temperature"], 0.0);
        assert_eq!(sent["model"], "mistral-medium");
    }

    #[test]
    fn failures_name_the_endpoint() {
        let (client, b) = backend(vec![Err(TransportError("connection refused".into()))]);
        let e = b.complete("hello").unwrap_err();
        assert!(e.to_string().contains("api.mistral.ai"), "{e}");
        assert_eq!(client.calls.load(Ordering::SeqCst), 4);

        let (client, b) = backend(vec![reply(401, json!({"error": "bad key"}))]);
        assert!(matches!(b.complete("x"), Err(ExtractorError::LlmTransport { .. })));
        assert_eq!(client.calls.load(Ordering::SeqCst), 1);

        let (_, b) = backend(vec![reply(200, json!({"choices": [{"message": {"content": "  "}}]}))]);
        assert!(matches!(b.complete("x"), Err(ExtractorError::LlmRefusal { .. })));
    }

    #[test]
    fn config_validation() {
        let mut c = LlmClientConfig::default();
        assert!(c.validate().is_ok());
        c.temperature = -0.1;
        assert!(c.validate().is_err());
        let c = LlmClientConfig {
            context_limit: 0,
            ..LlmClientConfig::default()
        };
        assert!(c.validate().is_err());
        assert_eq!(LlmClientConfig::default().context_limit, 32_768);
        assert!(LlmClientConfig::preset("gpt-3.5-turbo").is_some());
        assert!(LlmClientConfig::preset("nope").is_none());
    }

    #[test]
    fn mock_answers_like_the_oracle() {
        let schema = TraitSchema::new(vec![
            ("Habit", vec!["Tree", "Liana"]),
            ("Leaf", vec!["Simple", "Compound"]),
        ])
        .unwrap();
        let sentences = vec![ScoredSentence::new("X y", "u", "A small tree with compound leaves.", 0.9).unwrap()];
        let p = build_prompt("X y", &sentences, &schema, &PromptBudget::default()).unwrap();
        let c = MockLlm.complete(&p.rendered).unwrap();
        let parsed = parse_response(&c.text, &schema).unwrap();
        assert_eq!(parsed.evidence, MockLlm::oracle(&p.input_text, &schema));
        assert_eq!(parsed.evidence[0].bits(), [true, false]);
        assert_eq!(parsed.evidence[1].bits(), [false, true]);
        assert!(parse_response(&MockLlm.complete("unrelated").unwrap().text, &schema).is_err());
    }
}
