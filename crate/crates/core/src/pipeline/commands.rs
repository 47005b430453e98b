use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::context::{read_jsonl, require, to_jsonl};
use super::{BackendKind, Command, PipelineConfig, PipelineError, RunContext};
use crate::detector::{
    encode_model, evaluate_detector, load_model, train_with_validation, Detector, EmbeddingProvider,
    HashedNgramProvider, MetricsTable, PrecomputedProvider,
};
use crate::evaluation::{
    binary_confusion, cooccurrence, cross_cooccurrence, per_trait_csv, read_expert_rows, report_json, report_text,
    run_fn_study, score_matrix, select_snippets, write_records, EvalReport,
};
use crate::extractor::{
    extract_species, AuditLog, ExtractMode, HttpChatBackend, LlmBackend, MockLlm, PromptBudget, ResponseCache,
    SpeciesExtraction,
};
use crate::harvester::{
    document_sentences, harvest_species, CachedSearch, Fetcher, HarvestError, HttpSearchBackend, MockSearchBackend,
    MockWeb, RawCache, SearchBackend, UrlOutcome,
};
use crate::http::{HttpClient, UreqClient, DEFAULT_USER_AGENT};
use crate::matrix::{read_species_list, MatrixBuilder, SpeciesTraitMatrix};
use crate::record::{RawSentence, ScoredSentence};
use crate::schema::TraitSchema;
use crate::weak_label::{build_corpus, read_documents, CorpusConfig, HeaderRules};

const SENTENCES: &str = "sentences.jsonl";
const HARVEST_REPORT: &str = "harvest_report.json";
const CORPUS_DIR: &str = "corpus";
const DESCRIPTIVE: &str = "descriptive.jsonl";
const PREDICTED: &str = "predicted_matrix.csv";
const PREDICTED_SINGLE: &str = "predicted_matrix_single_trait.csv";
const EXTRACTIONS: &str = "extractions.jsonl";

/// Loads the configuration, applies the seed override and runs one command.
///
/// Returns the summary printed on stdout. `demo` always runs offline.
pub fn run_command(
    command: Command,
    config_path: &Path,
    seed: Option<u64>,
    offline: bool,
) -> Result<String, PipelineError> {
    let mut cfg = PipelineConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let offline = offline || command == Command::Demo;
    let ctx = RunContext::open(cfg, offline, command)?;
    let result = match command {
        Command::Harvest => cmd_harvest(&ctx),
        Command::BuildCorpus => cmd_build_corpus(&ctx),
        Command::TrainDetector => cmd_train_detector(&ctx),
        Command::Detect => cmd_detect(&ctx),
        Command::Extract => cmd_extract(&ctx),
        Command::Evaluate => cmd_evaluate(&ctx),
        Command::FnStudy => cmd_fn_study(&ctx),
        Command::Demo => cmd_demo(&ctx),
    };
    match &result {
        Ok(_) => ctx.event("finish", json!({"ok": true})),
        Err(e) => ctx.event("finish", json!({"ok": false, "error": e.to_string()})),
    }
    result
}

fn load_schema(cfg: &PipelineConfig) -> Result<TraitSchema, PipelineError> {
    TraitSchema::load(&cfg.schema_file)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", cfg.schema_file.display())))
}

fn load_species(cfg: &PipelineConfig) -> Result<Vec<String>, PipelineError> {
    read_species_list(&cfg.species_file)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", cfg.species_file.display())))
}

fn load_matrix(path: &Path, what: &'static str, command: &'static str) -> Result<SpeciesTraitMatrix, PipelineError> {
    require(path, what, command)?;
    let (m, warnings) = SpeciesTraitMatrix::read_csv(path)?;
    for w in warnings {
        log::warn!("{}: {w:?}", path.display());
    }
    Ok(m)
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("value serializes");
    out.push(b'\n');
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpeciesHarvest {
    species: String,
    query: Option<String>,
    documents: usize,
    sentences: usize,
    error: Option<String>,
    outcomes: Vec<UrlOutcome>,
}

type HarvestBackends = (Box<dyn SearchBackend>, Arc<dyn HttpClient>);

fn harvest_backends(ctx: &RunContext) -> Result<HarvestBackends, PipelineError> {
    let h = &ctx.cfg.harvest;
    if let Some(dir) = &h.mock_corpus {
        return Ok((Box::new(MockSearchBackend::load(dir)?), Arc::new(MockWeb::new(dir))));
    }
    if ctx.offline {
        return Err(PipelineError::Offline(
            "harvest needs network access; set harvest.mock_corpus to run offline".into(),
        ));
    }
    let ua = h.user_agent.as_deref().unwrap_or(DEFAULT_USER_AGENT);
    let client: Arc<dyn HttpClient> = Arc::new(UreqClient::new(ua, Duration::from_millis(h.timeout_ms)));
    let search = HttpSearchBackend::from_env(client.clone(), h.backoff.clone())?;
    Ok((Box::new(search), client))
}

/// Searches, fetches and header-filters pages for every species, then splits them into sentences.
pub fn cmd_harvest(ctx: &RunContext) -> Result<String, PipelineError> {
    let cfg = &ctx.cfg;
    let species = load_species(cfg)?;
    let (search, client) = harvest_backends(ctx)?;
    let search = CachedSearch::new(search, cfg.cache_dir.join("search"));
    let fetcher = Fetcher::new(
        client,
        cfg.harvest.fetch_config(),
        Some(RawCache::open(cfg.cache_dir.join("raw"))?),
    );
    let hcfg = cfg.harvest.harvest_config();

    let mut sentences: Vec<RawSentence> = Vec::new();
    let mut summary = Vec::new();
    for name in &species {
        match harvest_species(name, &search, &fetcher, &hcfg) {
            Ok(report) => {
                let before = sentences.len();
                for doc in &report.documents {
                    sentences.extend(document_sentences(&report.species, doc));
                }
                ctx.event(
                    "species",
                    json!({"species": name, "hits": report.hits.len(), "documents": report.documents.len()}),
                );
                summary.push(SpeciesHarvest {
                    species: report.species,
                    query: Some(report.query),
                    documents: report.documents.len(),
                    sentences: sentences.len() - before,
                    error: None,
                    outcomes: report.outcomes,
                });
            }
            Err(e @ HarvestError::MalformedBinomial(_)) => {
                log::warn!("{e}");
                summary.push(SpeciesHarvest {
                    species: name.clone(),
                    query: None,
                    documents: 0,
                    sentences: 0,
                    error: Some(e.to_string()),
                    outcomes: Vec::new(),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    ctx.write_output(SENTENCES, &to_jsonl(&sentences))?;
    ctx.write_output(HARVEST_REPORT, &pretty(&summary))?;

    let mut out = String::new();
    let width = summary.iter().map(|s| s.species.len()).max().unwrap_or(7).max(7);
    writeln!(out, "{:<width$}  {:>9}  {:>9}", "species", "documents", "sentences").unwrap();
    for s in &summary {
        let note = s.error.as_deref().map(|e| format!("  ({e})")).unwrap_or_default();
        writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}{note}",
            s.species, s.documents, s.sentences
        )
        .unwrap();
    }
    writeln!(
        out,
        "{} sentences from {} species, {} requests",
        sentences.len(),
        summary.len(),
        fetcher.request_count()
    )
    .unwrap();
    Ok(out)
}

/// Labels sectioned documents by header and writes the train/val/test span files.
pub fn cmd_build_corpus(ctx: &RunContext) -> Result<String, PipelineError> {
    let c = &ctx.cfg.corpus;
    let docs_path = c
        .documents_file
        .as_ref()
        .ok_or_else(|| PipelineError::Config("corpus.documents_file is required for build-corpus".into()))?;
    require(docs_path, "sectioned documents", "")?;
    let docs = read_documents(docs_path)?;
    let random = match &c.random_documents_file {
        Some(p) => {
            require(p, "random documents", "")?;
            read_documents(p)?
        }
        None => Vec::new(),
    };
    let rules = match &c.header_rules_file {
        Some(p) => HeaderRules::load(p)?,
        None => HeaderRules::defaults(),
    };
    let corpus = build_corpus(
        &docs,
        &random,
        &rules,
        &CorpusConfig {
            train_sources: c.train_sources.clone(),
            val_fraction: c.val_fraction,
            seed: ctx.cfg.seed,
        },
    );
    for (name, spans) in [("train", &corpus.train), ("val", &corpus.val), ("test", &corpus.test)] {
        ctx.write_output(&format!("{CORPUS_DIR}/{name}.jsonl"), &to_jsonl(spans))?;
    }
    let stats = corpus.stats();
    ctx.write_output(&format!("{CORPUS_DIR}/stats.json"), &pretty(&stats))?;
    let mut out = String::new();
    writeln!(out, "{:<6}  {:>11}  {:>15}", "split", "descriptive", "non-descriptive").unwrap();
    for (name, s) in [("train", stats.train), ("val", stats.val), ("test", stats.test)] {
        writeln!(out, "{name:<6}  {:>11}  {:>15}", s.descriptive, s.non_descriptive).unwrap();
    }
    Ok(out)
}

fn embedding_provider(cfg: &PipelineConfig) -> Result<Box<dyn EmbeddingProvider>, PipelineError> {
    Ok(match &cfg.detector.embeddings_file {
        Some(p) => {
            require(p, "embeddings", "")?;
            Box::new(PrecomputedProvider::load(p)?)
        }
        None => Box::new(HashedNgramProvider::new(cfg.detector.hash_dim, cfg.seed)),
    })
}

fn read_split(ctx: &RunContext, name: &str) -> Result<Vec<crate::weak_label::LabeledSpan>, PipelineError> {
    read_jsonl(
        &ctx.output_path(&format!("{CORPUS_DIR}/{name}.jsonl")),
        "corpus split",
        "build-corpus",
    )
}

/// Trains the descriptive-sentence head and writes the model and its metrics.
pub fn cmd_train_detector(ctx: &RunContext) -> Result<String, PipelineError> {
    let cfg = &ctx.cfg;
    let train = read_split(ctx, "train")?;
    let val = read_split(ctx, "val")?;
    let test = read_split(ctx, "test")?;
    let provider = embedding_provider(cfg)?;
    let mut tcfg = cfg.detector.train.clone();
    tcfg.seed = cfg.seed;
    let (head, log) = train_with_validation(&train, &val, provider.as_ref(), &tcfg)?;
    let threshold = cfg.detector.threshold;

    let model_path = cfg.model_file();
    ctx.write_to(&model_path, &encode_model(&provider.descriptor(), &head, threshold))?;

    let mut table = MetricsTable::default();
    let train_m = evaluate_detector(&head, provider.as_ref(), &train, threshold);
    log::info!("train macro F1 {:.4}", train_m.macro_f1());
    let mut summary = String::new();
    for (name, spans) in [("val", &val), ("test", &test)] {
        if spans.is_empty() {
            continue;
        }
        let m = evaluate_detector(&head, provider.as_ref(), spans, threshold);
        writeln!(
            summary,
            "{name:<4}  descriptive F1 {:.4}  non-descriptive F1 {:.4}  macro F1 {:.4}",
            m.descriptive.f1,
            m.non_descriptive.f1,
            m.macro_f1()
        )
        .unwrap();
        table.push(name, m);
    }
    ctx.write_output("detector_metrics.csv", table.to_csv().as_bytes())?;
    ctx.write_output(
        "detector_training.json",
        &pretty(&json!({"config": tcfg, "epochs": log})),
    )?;
    writeln!(summary, "model written to {}", model_path.display()).unwrap();
    Ok(summary)
}

fn load_detector(cfg: &PipelineConfig) -> Result<Detector, PipelineError> {
    let path = cfg.model_file();
    require(&path, "detector model", "train-detector")?;
    let saved = load_model(&path)?;
    Ok(match &cfg.detector.embeddings_file {
        Some(p) => saved.with_provider(Box::new(PrecomputedProvider::load(p)?))?,
        None => saved.into_detector()?,
    })
}

/// Keeps harvested sentences the detector scores as descriptive.
pub fn cmd_detect(ctx: &RunContext) -> Result<String, PipelineError> {
    let sentences: Vec<RawSentence> = read_jsonl(&ctx.output_path(SENTENCES), "harvested sentences", "harvest")?;
    let detector = load_detector(&ctx.cfg)?;
    let kept = detector.filter(&sentences);
    ctx.write_output(DESCRIPTIVE, &to_jsonl(&kept))?;

    let species = load_species(&ctx.cfg)?;
    let mut counts: BTreeMap<&str, (usize, usize)> = species.iter().map(|s| (s.as_str(), (0, 0))).collect();
    for s in &sentences {
        counts.entry(&s.species).or_default().0 += 1;
    }
    for s in &kept {
        counts.entry(&s.species).or_default().1 += 1;
    }
    let mut out = String::new();
    let width = counts.keys().map(|s| s.len()).max().unwrap_or(7).max(7);
    writeln!(out, "{:<width$}  {:>9}  {:>11}", "species", "sentences", "descriptive").unwrap();
    for (name, (all, desc)) in &counts {
        writeln!(out, "{name:<width$}  {all:>9}  {desc:>11}").unwrap();
    }
    let mean = if counts.is_empty() {
        0.0
    } else {
        kept.len() as f64 / counts.len() as f64
    };
    writeln!(
        out,
        "{} of {} sentences kept, {mean:.1} per species",
        kept.len(),
        sentences.len()
    )
    .unwrap();
    Ok(out)
}

fn llm_backend(ctx: &RunContext) -> Result<(Box<dyn LlmBackend>, PromptBudget), PipelineError> {
    let client_cfg = ctx.cfg.extractor.client_config()?;
    let budget = client_cfg.budget();
    if ctx.offline || ctx.cfg.extractor.backend == BackendKind::Mock {
        return Ok((Box::new(MockLlm), budget));
    }
    let client = Arc::new(UreqClient::new(DEFAULT_USER_AGENT, client_cfg.timeout));
    Ok((Box::new(HttpChatBackend::new(client, client_cfg)?), budget))
}

/// Runs the model over every species' descriptive sentences.
fn extract_all(
    ctx: &RunContext,
    schema: &TraitSchema,
    mode: ExtractMode,
    backend: &dyn LlmBackend,
    budget: &PromptBudget,
) -> Result<(SpeciesTraitMatrix, Vec<SpeciesExtraction>), PipelineError> {
    let species = load_species(&ctx.cfg)?;
    let kept: Vec<ScoredSentence> = read_jsonl(&ctx.output_path(DESCRIPTIVE), "descriptive sentences", "detect")?;
    let mut by_species: BTreeMap<String, Vec<ScoredSentence>> = BTreeMap::new();
    for s in kept {
        by_species
            .entry(crate::text::match_key(&s.species))
            .or_default()
            .push(s);
    }
    let cache = ResponseCache::new(ctx.cfg.cache_dir.join("llm"));
    let audit =
        AuditLog::open(ctx.cfg.cache_dir.join("audit.jsonl")).map_err(|e| PipelineError::io(&ctx.cfg.cache_dir, e))?;

    let next = Mutex::new(0usize);
    let failed = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<Result<SpeciesExtraction, PipelineError>>>> =
        species.iter().map(|_| Mutex::new(None)).collect();
    let workers = ctx.cfg.extractor.parallelism.max(1).min(species.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if failed.load(Ordering::SeqCst) {
                    break;
                }
                let i = {
                    let mut n = next.lock().unwrap();
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(name) = species.get(i) else { break };
                let sentences = by_species
                    .get(&crate::text::match_key(name))
                    .map(Vec::as_slice)
                    .unwrap_or(&[]);
                let r = extract_species(name, sentences, schema, mode, backend, Some(&cache), budget)
                    .map_err(PipelineError::from)
                    .and_then(|x| {
                        audit
                            .append(&x.audit)
                            .map_err(|e| PipelineError::io(Path::new("audit.jsonl"), e))?;
                        Ok(x)
                    });
                if r.is_err() {
                    failed.store(true, Ordering::SeqCst);
                }
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });

    let mut builder = MatrixBuilder::with_species(schema.clone(), &species)?;
    let mut extractions = Vec::new();
    for (i, slot) in slots.into_iter().enumerate() {
        match slot.into_inner().unwrap() {
            Some(Ok(x)) => {
                for (ti, cell) in x.row.iter().enumerate() {
                    builder.set_cell(i, ti, cell.clone());
                }
                extractions.push(x);
            }
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    if extractions.len() != species.len() {
        return Err(PipelineError::Config("extraction stopped early".into()));
    }
    Ok((builder.build(), extractions))
}

fn extraction_summary(matrix: &SpeciesTraitMatrix, extractions: &[SpeciesExtraction]) -> String {
    let calls: usize = extractions.iter().map(|x| x.audit.len()).sum();
    let hits = extractions
        .iter()
        .flat_map(|x| &x.audit)
        .filter(|a| a.cache_hit)
        .count();
    let tokens: usize = extractions
        .iter()
        .flat_map(|x| &x.audit)
        .map(|a| a.input_tokens + a.output_tokens)
        .sum();
    let halluc: usize = extractions
        .iter()
        .flat_map(|x| &x.audit)
        .map(|a| a.hallucination_count)
        .sum();
    format!(
        "{} species, {calls} model calls ({hits} cached), {tokens} tokens, {halluc} out-of-schema answers, coverage {:.3}\n",
        matrix.species().len(),
        matrix.coverage()
    )
}

/// Fills the species-trait matrix from the descriptive sentences.
pub fn cmd_extract(ctx: &RunContext) -> Result<String, PipelineError> {
    let schema = load_schema(&ctx.cfg)?;
    let (backend, budget) = llm_backend(ctx)?;
    let mode = ctx.cfg.extractor.mode;
    let (matrix, extractions) = extract_all(ctx, &schema, mode, backend.as_ref(), &budget)?;
    ctx.write_output(PREDICTED, matrix.to_csv_string().as_bytes())?;
    let results: Vec<_> = extractions.iter().flat_map(|x| &x.results).collect();
    ctx.write_output(EXTRACTIONS, &to_jsonl(&results))?;
    Ok(extraction_summary(&matrix, &extractions))
}

fn slug(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

fn evaluate_into(
    ctx: &RunContext,
    pred: &SpeciesTraitMatrix,
    reference: &SpeciesTraitMatrix,
) -> Result<(EvalReport, String), PipelineError> {
    let report = score_matrix(pred, reference)?;
    ctx.write_output("eval/report.json", report_json(&report).as_bytes())?;
    let text = report_text("prediction", &report);
    ctx.write_output("eval/report.txt", text.as_bytes())?;
    ctx.write_output("eval/per_trait.csv", per_trait_csv(&report).as_bytes())?;

    let e = &ctx.cfg.eval;
    let traits: Vec<String> = if e.cooccurrence_traits.is_empty() {
        reference
            .schema()
            .traits()
            .iter()
            .map(|t| t.name().to_string())
            .collect()
    } else {
        e.cooccurrence_traits.clone()
    };
    for t in &traits {
        let base = format!("eval/cooccurrence/{}", slug(t));
        let mats = [
            ("annotation", cooccurrence(reference, t)?),
            ("prediction", cooccurrence(pred, t)?),
            ("cross", cross_cooccurrence(reference, pred, t)?),
        ];
        for (kind, m) in mats {
            ctx.write_output(&format!("{base}_{kind}.csv"), m.to_csv().as_bytes())?;
            if e.svg {
                ctx.write_output(&format!("{base}_{kind}.svg"), m.to_svg().as_bytes())?;
            }
        }
    }
    Ok((report, text))
}

/// Scores the predicted matrix against the reference and draws co-occurrence matrices.
pub fn cmd_evaluate(ctx: &RunContext) -> Result<String, PipelineError> {
    let e = &ctx.cfg.eval;
    let ref_path = e
        .reference_matrix_file
        .as_ref()
        .ok_or_else(|| PipelineError::Config("eval.reference_matrix_file is required for evaluate".into()))?;
    let reference = load_matrix(ref_path, "reference matrix", "")?;
    let pred_path = e.prediction_file.clone().unwrap_or_else(|| ctx.output_path(PREDICTED));
    let pred = load_matrix(&pred_path, "predicted matrix", "extract")?;
    Ok(evaluate_into(ctx, &pred, &reference)?.1)
}

/// Proposes snippets for expert review and, given verdicts, tabulates what the model missed.
pub fn cmd_fn_study(ctx: &RunContext) -> Result<String, PipelineError> {
    let cfg = &ctx.cfg;
    let schema = load_schema(cfg)?;
    let mut out = String::new();

    let desc_path = ctx.output_path(DESCRIPTIVE);
    if desc_path.exists() {
        let store: Vec<ScoredSentence> = read_jsonl(&desc_path, "descriptive sentences", "detect")?;
        let species = load_species(cfg)?;
        let provider = HashedNgramProvider::new(cfg.detector.hash_dim, cfg.seed);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["trait", "species", "snippet", "expert_verdict"])
            .map_err(crate::evaluation::EvalError::from)?;
        for t in schema.traits() {
            for (sp, snippet) in select_snippets(t.name(), &species, &store, &provider, cfg.eval.snippets_per_trait) {
                w.write_record([t.name(), sp, snippet, ""])
                    .map_err(crate::evaluation::EvalError::from)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| PipelineError::Config(e.to_string()))?;
        ctx.write_output("fn_study/candidates.csv", &bytes)?;
        writeln!(
            out,
            "candidate snippets written to {}",
            ctx.output_path("fn_study/candidates.csv").display()
        )
        .unwrap();
    }

    let Some(study) = &cfg.eval.fn_study_file else {
        if out.is_empty() {
            return Err(PipelineError::Config(
                "fn-study needs eval.fn_study_file or the output of `detect`".into(),
            ));
        }
        return Ok(out);
    };
    require(study, "expert verdicts", "")?;
    let file = std::fs::File::open(study).map_err(|e| PipelineError::io(study, e))?;
    let rows = read_expert_rows(file)?;
    let (backend, budget) = llm_backend(ctx)?;
    let cache = ResponseCache::new(cfg.cache_dir.join("llm"));
    let records = run_fn_study(&rows, &schema, backend.as_ref(), Some(&cache), &budget)?;
    ctx.write_output("fn_study/records.csv", write_records(&records)?.as_bytes())?;
    let confusion = binary_confusion(&records)?;
    ctx.write_output("fn_study/confusion.txt", confusion.to_text().as_bytes())?;
    ctx.write_output("fn_study/confusion.csv", confusion.to_csv().as_bytes())?;
    ctx.write_output("fn_study/confusion.json", &pretty(&confusion))?;
    out.push_str(&confusion.to_text());
    Ok(out)
}

/// Runs every stage offline against the configured mock corpus and checks the result.
///
/// Fails when the two extraction modes disagree, when the prediction differs
/// from the reference matrix, or when it differs from the golden file.
pub fn cmd_demo(ctx: &RunContext) -> Result<String, PipelineError> {
    if !ctx.offline {
        return Err(PipelineError::Config("demo runs offline only".into()));
    }
    if ctx.cfg.harvest.mock_corpus.is_none() {
        return Err(PipelineError::Config("demo needs harvest.mock_corpus".into()));
    }
    let mut out = String::new();
    let stage = |out: &mut String, name: &str, r: Result<String, PipelineError>| -> Result<(), PipelineError> {
        let text = r?;
        writeln!(out, "== {name}\n{}", text.trim_end()).unwrap();
        Ok(())
    };
    stage(&mut out, "harvest", cmd_harvest(ctx))?;
    stage(&mut out, "build-corpus", cmd_build_corpus(ctx))?;
    stage(&mut out, "train-detector", cmd_train_detector(ctx))?;
    stage(&mut out, "detect", cmd_detect(ctx))?;
    stage(&mut out, "extract", cmd_extract(ctx))?;

    let schema = load_schema(&ctx.cfg)?;
    let (backend, budget) = llm_backend(ctx)?;
    let (single, _) = extract_all(ctx, &schema, ExtractMode::SingleTrait, backend.as_ref(), &budget)?;
    ctx.write_output(PREDICTED_SINGLE, single.to_csv_string().as_bytes())?;
    let pred = load_matrix(&ctx.output_path(PREDICTED), "predicted matrix", "extract")?;
    if single != pred {
        return Err(PipelineError::DemoMismatch(
            "all-traits and single-trait matrices differ".into(),
        ));
    }

    let mut checks = Vec::new();
    if let Some(ref_path) = &ctx.cfg.eval.reference_matrix_file {
        let reference = load_matrix(ref_path, "reference matrix", "")?;
        let (report, text) = evaluate_into(ctx, &pred, &reference)?;
        stage(&mut out, "evaluate", Ok(text))?;
        if report.f1 != 1.0 {
            return Err(PipelineError::DemoMismatch(format!(
                "F1 {} against the planted matrix",
                report.f1
            )));
        }
        if report.coverage != reference.coverage() {
            return Err(PipelineError::DemoMismatch(format!(
                "coverage {} but the planted matrix has {}",
                report.coverage,
                reference.coverage()
            )));
        }
        checks.push("planted matrix recovered");
    }
    if ctx.cfg.eval.fn_study_file.is_some() {
        stage(&mut out, "fn-study", cmd_fn_study(ctx))?;
    }
    if let Some(golden) = &ctx.cfg.demo.golden_matrix_file {
        require(golden, "golden matrix", "")?;
        let want = std::fs::read(golden).map_err(|e| PipelineError::io(golden, e))?;
        if want != pred.to_csv_string().into_bytes() {
            return Err(PipelineError::DemoMismatch(format!(
                "{} differs from {}",
                ctx.output_path(PREDICTED).display(),
                golden.display()
            )));
        }
        checks.push("golden matrix matched");
    }
    checks.push("extraction modes agree");
    writeln!(out, "== demo OK: {}", checks.join(", ")).unwrap();
    Ok(out)
}
