//! The stages as resumable commands sharing one JSON configuration.
//!
//! Outputs go to `output_dir` and are rewritten only when their bytes change;
//! caches, the model-call audit log and per-run event logs live in `cache_dir`.

mod commands;
mod config;
mod context;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use commands::{
    cmd_build_corpus, cmd_demo, cmd_detect, cmd_evaluate, cmd_extract, cmd_fn_study, cmd_harvest, cmd_train_detector,
    run_command,
};
pub use config::{
    BackendKind, CorpusSection, DemoSection, DetectorSection, EvalSection, ExtractorSection, HarvestSection,
    PipelineConfig,
};
pub use context::RunContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Harvest,
    BuildCorpus,
    TrainDetector,
    Detect,
    Extract,
    Evaluate,
    FnStudy,
    Demo,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Harvest,
        Command::BuildCorpus,
        Command::TrainDetector,
        Command::Detect,
        Command::Extract,
        Command::Evaluate,
        Command::FnStudy,
        Command::Demo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Harvest => "harvest",
            Command::BuildCorpus => "build-corpus",
            Command::TrainDetector => "train-detector",
            Command::Detect => "detect",
            Command::Extract => "extract",
            Command::Evaluate => "evaluate",
            Command::FnStudy => "fn-study",
            Command::Demo => "demo",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| PipelineError::Config(format!("unknown command {s:?}")))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing input {what}: {path}{}", run_first(command))]
    MissingInput {
        what: &'static str,
        path: String,
        /// Stage producing the input; empty for user-supplied files.
        command: &'static str,
    },
    #[error("{0}")]
    Offline(String),
    #[error("demo check failed: {0}")]
    DemoMismatch(String),
    #[error(transparent)]
    Core(#[from] crate::error::CoreError),
    #[error(transparent)]
    Harvest(#[from] crate::harvester::HarvestError),
    #[error(transparent)]
    WeakLabel(#[from] crate::weak_label::WeakLabelError),
    #[error(transparent)]
    Detector(#[from] crate::detector::DetectorError),
    #[error(transparent)]
    Extractor(#[from] crate::extractor::ExtractorError),
    #[error(transparent)]
    Eval(#[from] crate::evaluation::EvalError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Record { path: String, line: usize, message: String },
}

fn run_first(command: &str) -> String {
    if command.is_empty() {
        String::new()
    } else {
        format!(" (run `{command}` first?)")
    }
}

impl PipelineError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
