use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use super::{Command, PipelineConfig, PipelineError};
use crate::fsutil::write_if_changed;

/// One command invocation: configuration, cache lock and event log.
pub struct RunContext {
    pub cfg: PipelineConfig,
    /// No network: mock search, mock web and mock model only.
    pub offline: bool,
    pub command: Command,
    events: Mutex<File>,
    events_path: PathBuf,
    _lock: File,
}

impl RunContext {
    /// Creates the directories, takes the cache lock (blocking while another
    /// run holds it) and opens this run's event log.
    pub fn open(cfg: PipelineConfig, offline: bool, command: Command) -> Result<Self, PipelineError> {
        for d in [&cfg.cache_dir, &cfg.output_dir] {
            fs::create_dir_all(d).map_err(|e| PipelineError::io(d, e))?;
        }
        let lock_path = cfg.cache_dir.join(".lock");
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| PipelineError::io(&lock_path, e))?;
        lock.lock().map_err(|e| PipelineError::io(&lock_path, e))?;

        let runs = cfg.cache_dir.join("runs");
        fs::create_dir_all(&runs).map_err(|e| PipelineError::io(&runs, e))?;
        let stamp = Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        let events_path = runs.join(format!("{stamp}-{command}.jsonl"));
        let events = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&events_path)
            .map_err(|e| PipelineError::io(&events_path, e))?;
        let ctx = Self {
            cfg,
            offline,
            command,
            events: Mutex::new(events),
            events_path,
            _lock: lock,
        };
        ctx.event("start", json!({"offline": offline, "seed": ctx.cfg.seed}));
        Ok(ctx)
    }

    pub fn events_path(&self) -> &Path {
        &self.events_path
    }

    /// Appends `{ts, command, event, ...fields}` to the event log.
    pub fn event(&self, name: &str, fields: Value) {
        let mut rec = json!({
            "ts": Utc::now().to_rfc3339(),
            "command": self.command.as_str(),
            "event": name,
        });
        if let (Value::Object(dst), Value::Object(src)) = (&mut rec, fields) {
            dst.extend(src);
        }
        let mut f = self.events.lock().unwrap();
        if let Err(e) = writeln!(f, "{rec}") {
            log::warn!("event log: {e}");
        }
    }

    pub fn output_path(&self, rel: &str) -> PathBuf {
        self.cfg.output_dir.join(rel)
    }

    /// Writes a file under the output directory unless it already holds `bytes`.
    pub fn write_output(&self, rel: &str, bytes: &[u8]) -> Result<PathBuf, PipelineError> {
        let path = self.output_path(rel);
        self.write_to(&path, bytes)?;
        Ok(path)
    }

    /// Like [`write_output`](Self::write_output) for an absolute path, which must lie in the
    /// output or cache directory.
    pub fn write_to(&self, path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
        if !path.starts_with(&self.cfg.output_dir) && !path.starts_with(&self.cfg.cache_dir) {
            return Err(PipelineError::Config(format!(
                "refusing to write {} outside the output and cache directories",
                path.display()
            )));
        }
        let changed = write_if_changed(path, bytes).map_err(|e| PipelineError::io(path, e))?;
        self.event("write", json!({"path": path.display().to_string(), "changed": changed}));
        Ok(())
    }
}

pub(crate) fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it).expect("record serializes");
        out.push(b'\n');
    }
    out
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    what: &'static str,
    command: &'static str,
) -> Result<Vec<T>, PipelineError> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            PipelineError::MissingInput {
                what,
                path: path.display().to_string(),
                command,
            }
        } else {
            PipelineError::io(path, e)
        }
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| PipelineError::Record {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub(crate) fn require(path: &Path, what: &'static str, command: &'static str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingInput {
            what,
            path: path.display().to_string(),
            command,
        })
    }
}
