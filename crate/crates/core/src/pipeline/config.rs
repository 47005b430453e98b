use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::detector::{TrainConfig, DEFAULT_HASH_DIM, DEFAULT_THRESHOLD};
use crate::extractor::{ExtractMode, LlmClientConfig};
use crate::harvester::{FetchConfig, HarvestConfig};
use crate::http::Backoff;

/// Whole-run configuration, read from one JSON file.
///
/// Relative paths are resolved against the directory holding the file.
/// Only `species_file` and `schema_file` are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub species_file: PathBuf,
    pub schema_file: PathBuf,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Source of every random choice in the run.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub harvest: HarvestSection,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub extractor: ExtractorSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub demo: DemoSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoSection {
    /// Expected bytes of the predicted matrix; the demo fails on any difference.
    pub golden_matrix_file: Option<PathBuf>,
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from("cache")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarvestSection {
    pub url_limit: usize,
    pub parallelism: usize,
    pub per_domain_delay_ms: u64,
    pub respect_robots: bool,
    pub timeout_ms: u64,
    pub user_agent: Option<String>,
    pub backoff: Backoff,
    /// Directory served by the offline search backend and web.
    pub mock_corpus: Option<PathBuf>,
}

impl Default for HarvestSection {
    fn default() -> Self {
        let h = HarvestConfig::default();
        let f = FetchConfig::default();
        Self {
            url_limit: h.url_limit,
            parallelism: h.parallelism,
            per_domain_delay_ms: f.per_domain_delay.as_millis() as u64,
            respect_robots: f.respect_robots,
            timeout_ms: 30_000,
            user_agent: None,
            backoff: f.backoff,
            mock_corpus: None,
        }
    }
}

impl HarvestSection {
    pub fn harvest_config(&self) -> HarvestConfig {
        HarvestConfig {
            url_limit: self.url_limit,
            parallelism: self.parallelism,
        }
    }

    pub fn fetch_config(&self) -> FetchConfig {
        let mut f = FetchConfig {
            backoff: self.backoff.clone(),
            per_domain_delay: Duration::from_millis(self.per_domain_delay_ms),
            respect_robots: self.respect_robots,
            ..FetchConfig::default()
        };
        if let Some(ua) = &self.user_agent {
            f.user_agent = ua.clone();
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// JSON-lines sectioned documents from structured botanical sources.
    pub documents_file: Option<PathBuf>,
    /// JSON-lines pages used whole as non-descriptive examples.
    pub random_documents_file: Option<PathBuf>,
    /// Replaces the built-in header rule table.
    pub header_rules_file: Option<PathBuf>,
    pub train_sources: Vec<String>,
    pub val_fraction: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let c = crate::weak_label::CorpusConfig::default();
        Self {
            documents_file: None,
            random_documents_file: None,
            header_rules_file: None,
            train_sources: c.train_sources,
            val_fraction: c.val_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    /// Defaults to `detector.bin` in the output directory.
    pub model_file: Option<PathBuf>,
    pub threshold: f64,
    pub hash_dim: usize,
    /// Precomputed sentence embeddings (JSON lines of `{text, vector}`) used instead of hashing.
    pub embeddings_file: Option<PathBuf>,
    pub train: TrainConfig,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            model_file: None,
            threshold: DEFAULT_THRESHOLD,
            hash_dim: DEFAULT_HASH_DIM,
            embeddings_file: None,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorSection {
    pub backend: BackendKind,
    /// Named model settings; fields in `llm` override it.
    pub preset: Option<String>,
    pub llm: Option<serde_json::Value>,
    pub mode: ExtractMode,
    pub parallelism: usize,
}

impl Default for ExtractorSection {
    fn default() -> Self {
        Self {
            backend: BackendKind::Http,
            preset: None,
            llm: None,
            mode: ExtractMode::AllTraits,
            parallelism: 2,
        }
    }
}

impl ExtractorSection {
    /// Preset (default `mistral-medium`) with the `llm` overrides applied.
    pub fn client_config(&self) -> Result<LlmClientConfig, PipelineError> {
        let name = self.preset.as_deref().unwrap_or("mistral-medium");
        let base = LlmClientConfig::preset(name)
            .ok_or_else(|| PipelineError::Config(format!("unknown model preset {name:?}")))?;
        let mut value = serde_json::to_value(base).expect("config serializes");
        if let Some(serde_json::Value::Object(over)) = &self.llm {
            for (k, v) in over {
                value[k] = v.clone();
            }
        } else if self.llm.is_some() {
            return Err(PipelineError::Config("extractor.llm must be an object".into()));
        }
        let cfg: LlmClientConfig =
            serde_json::from_value(value).map_err(|e| PipelineError::Config(format!("extractor.llm: {e}")))?;
        cfg.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub reference_matrix_file: Option<PathBuf>,
    /// Defaults to the extract command's output.
    pub prediction_file: Option<PathBuf>,
    /// Traits to draw co-occurrence matrices for; empty means all.
    pub cooccurrence_traits: Vec<String>,
    pub svg: bool,
    /// Expert verdict CSV: trait, species, snippet, expert_verdict.
    pub fn_study_file: Option<PathBuf>,
    /// Candidate snippets per trait proposed for expert review.
    pub snippets_per_trait: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            reference_matrix_file: None,
            prediction_file: None,
            cooccurrence_traits: Vec::new(),
            svg: true,
            fn_study_file: None,
            snippets_per_trait: 5,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = normalize(&base.join(&*p));
            }
        };
        fix(&mut self.species_file);
        fix(&mut self.schema_file);
        fix(&mut self.cache_dir);
        fix(&mut self.output_dir);
        let opts = [
            &mut self.harvest.mock_corpus,
            &mut self.corpus.documents_file,
            &mut self.corpus.random_documents_file,
            &mut self.corpus.header_rules_file,
            &mut self.detector.model_file,
            &mut self.detector.embeddings_file,
            &mut self.eval.reference_matrix_file,
            &mut self.eval.prediction_file,
            &mut self.eval.fn_study_file,
            &mut self.demo.golden_matrix_file,
        ];
        for p in opts.into_iter().flatten() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.harvest.url_limit == 0 {
            return bad("harvest.url_limit must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.detector.threshold) {
            return bad(format!(
                "detector.threshold {} is outside [0, 1]",
                self.detector.threshold
            ));
        }
        if self.detector.hash_dim == 0 {
            return bad("detector.hash_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.corpus.val_fraction) {
            return bad(format!(
                "corpus.val_fraction {} is outside [0, 1)",
                self.corpus.val_fraction
            ));
        }
        self.detector
            .train
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn model_file(&self) -> PathBuf {
        self.detector
            .model_file
            .clone()
            .unwrap_or_else(|| self.output_dir.join("detector.bin"))
    }
}

/// Removes `.` and resolvable `..` components without touching the filesystem.
fn normalize(path: &Path) -> PathBuf {
    use std::path::Component;
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if matches!(out.components().next_back(), Some(Component::Normal(_))) {
                    out.pop();
                } else {
                    out.push("..");
                }
            }
            other => out.push(other),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        std::fs::write(
            &p,
            r#"{"species_file": "species.txt", "schema_file": "/abs/schema.json"}"#,
        )
        .unwrap();
        let c = PipelineConfig::load(&p).unwrap();
        assert_eq!(c.species_file, dir.path().join("species.txt"));
        assert_eq!(c.schema_file, PathBuf::from("/abs/schema.json"));
        assert_eq!(c.output_dir, dir.path().join("out"));
        assert_eq!(c.harvest.url_limit, 20);
        assert_eq!(c.detector.threshold, 0.5);
        assert_eq!(c.extractor.parallelism, 2);
        assert_eq!(c.model_file(), dir.path().join("out/detector.bin"));
        let llm = c.extractor.client_config().unwrap();
        assert_eq!((llm.context_limit, llm.temperature), (32_768, 0.0));
    }

    #[test]
    fn relative_paths_are_normalized() {
        assert_eq!(normalize(Path::new("a/b/../../c/./d")), PathBuf::from("c/d"));
        assert_eq!(normalize(Path::new("../x/../y")), PathBuf::from("../y"));
        assert_eq!(normalize(Path::new("/r/a/../b")), PathBuf::from("/r/b"));
    }

    #[test]
    fn rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        for body in [
            r#"{"schema_file": "s.json"}"#,
            r#"{"species_file": "a", "schema_file": "b", "detector": {"threshold": 1.5}}"#,
            r#"{"species_file": "a", "schema_file": "b", "harvest": {"url_limit": 0}}"#,
            r#"{"species_file": "a", "schema_file": "b", "typo": 1}"#,
            r#"{"species_file": "a", "schema_file": "b", "extractor": {"llm": {"temperature": -1}}}"#,
        ] {
            std::fs::write(&p, body).unwrap();
            let r = PipelineConfig::load(&p).and_then(|c| c.extractor.client_config().map(|_| c));
            assert!(r.is_err(), "{body}");
        }
    }

    #[test]
    fn llm_overrides_apply_on_top_of_preset() {
        let s = ExtractorSection {
            preset: Some("gpt-3.5-turbo".into()),
            llm: Some(serde_json::json!({"endpoint_url": "http://127.0.0.1:9/v1/chat", "max_retries": 0})),
            ..ExtractorSection::default()
        };
        let c = s.client_config().unwrap();
        assert_eq!(c.model_id, "gpt-3.5-turbo");
        assert_eq!(c.endpoint_url, "http://127.0.0.1:9/v1/chat");
        assert_eq!(c.max_retries, 0);
        assert_eq!(c.api_key_env_name, "OPENAI_API_KEY");
    }
}
