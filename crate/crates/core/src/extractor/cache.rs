use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::backend::{Completion, LlmBackend};
use super::ExtractorError;
use crate::fsutil::write_atomic;
use crate::record::content_digest;

#[derive(Serialize, Deserialize)]
struct CachedCompletion {
    model_id: String,
    prompt_digest: String,
    completion: Completion,
}

/// Completions stored on disk by digest of (model id, rendered prompt).
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        Self {
            dir: dir.as_ref().to_path_buf(),
        }
    }

    pub fn key(model_id: &str, prompt: &str) -> String {
        content_digest(format!("{model_id}\n{prompt}").as_bytes())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, model_id: &str, prompt: &str) -> Option<Completion> {
        let bytes = fs::read(self.path(&Self::key(model_id, prompt))).ok()?;
        let c: CachedCompletion = serde_json::from_slice(&bytes).ok()?;
        (c.model_id == model_id && c.prompt_digest == content_digest(prompt.as_bytes())).then_some(c.completion)
    }

    pub fn put(&self, model_id: &str, prompt: &str, completion: &Completion) -> Result<(), ExtractorError> {
        let record = CachedCompletion {
            model_id: model_id.to_string(),
            prompt_digest: content_digest(prompt.as_bytes()),
            completion: completion.clone(),
        };
        let json = serde_json::to_vec_pretty(&record).map_err(|e| ExtractorError::Cache(e.to_string()))?;
        write_atomic(&self.path(&Self::key(model_id, prompt)), &json).map_err(|e| ExtractorError::Cache(e.to_string()))
    }

    /// Cached completion if present, otherwise calls the backend and stores the answer.
    /// The flag tells whether the cache answered.
    pub fn complete(&self, backend: &dyn LlmBackend, prompt: &str) -> Result<(Completion, bool), ExtractorError> {
        if let Some(c) = self.get(backend.model_id(), prompt) {
            return Ok((c, true));
        }
        let c = backend.complete(prompt)?;
        self.put(backend.model_id(), prompt, &c)?;
        Ok((c, false))
    }
}

/// One model call as recorded in the audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub species: String,
    pub mode: String,
    /// Set in single-trait mode.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trait_name: Option<String>,
    pub model_id: String,
    pub input_tokens: usize,
    pub output_tokens: usize,
    pub cache_hit: bool,
    pub hallucination_count: usize,
    pub parsed: bool,
    pub sentences_used: usize,
    pub sentences_dropped: usize,
    pub duplicates_removed: usize,
}

/// Append-only JSON-lines file.
pub struct AuditLog {
    file: Mutex<fs::File>,
}

impl AuditLog {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        if let Some(dir) = path.as_ref().parent() {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(file) })
    }

    pub fn append(&self, records: &[AuditRecord]) -> std::io::Result<()> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        let mut f = self.file.lock().unwrap();
        f.write_all(&buf)?;
        f.flush()
    }
}
