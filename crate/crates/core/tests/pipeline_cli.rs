mod common;

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use florafill::pipeline::{run_command, Command, PipelineError};
use florafill::{Cell, MatrixBuilder, SpeciesTraitMatrix, TraitSchema};

fn relative(snap: Vec<(PathBuf, Vec<u8>)>, root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    snap.into_iter()
        .map(|(p, b)| (p.strip_prefix(root).unwrap().to_path_buf(), b))
        .collect()
}

fn changed_writes(events: &Path) -> usize {
    std::fs::read_to_string(events)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["event"] == "write" && v["changed"] == true)
        .count()
}

fn newest_run(cache: &Path) -> PathBuf {
    let mut runs: Vec<PathBuf> = std::fs::read_dir(cache.join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    runs.sort();
    runs.pop().unwrap()
}

#[test]
fn demo_is_idempotent_deterministic_and_confined() {
    let fixtures_before = common::snapshot(&common::fixtures());
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config_a = common::write_demo_config(a.path(), |_| {});
    let config_b = common::write_demo_config(b.path(), |_| {});

    run_command(Command::Demo, &config_a, None, true).unwrap();
    let first = common::snapshot(&a.path().join("out"));
    run_command(Command::Demo, &config_a, None, true).unwrap();
    assert_eq!(common::snapshot(&a.path().join("out")), first);
    assert_eq!(changed_writes(&newest_run(&a.path().join("cache"))), 0);

    run_command(Command::Demo, &config_b, None, true).unwrap();
    assert_eq!(
        relative(common::snapshot(&b.path().join("out")), &b.path().join("out")),
        relative(first, &a.path().join("out"))
    );

    for (path, _) in common::snapshot(a.path()) {
        let rel = path.strip_prefix(a.path()).unwrap();
        assert!(
            rel.starts_with("cache") || rel.starts_with("out") || rel == Path::new("run.json"),
            "unexpected file {}",
            path.display()
        );
    }
    assert_eq!(common::snapshot(&common::fixtures()), fixtures_before);
}

#[test]
fn evaluate_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let schema = TraitSchema::load(common::fixtures().join("demo/schema.json")).unwrap();
    let species = ["Albizia lebbeck", "Hedera helix", "Nerium oleander"];
    let mut b = MatrixBuilder::with_species(schema.clone(), species).unwrap();
    for si in 0..species.len() {
        for (ti, t) in schema.traits().iter().enumerate() {
            let bits = (0..t.values().len()).map(|vi| (si + vi) % 2 == 0).collect();
            b.set_cell(si, ti, Cell::from_bits(bits));
        }
    }
    let m = b.build();
    let path = dir.path().join("full.csv");
    std::fs::write(&path, m.to_csv_string()).unwrap();
    let config = common::write_demo_config(dir.path(), |cfg| {
        cfg.eval.reference_matrix_file = Some(path.clone());
        cfg.eval.prediction_file = Some(path.clone());
    });
    run_command(Command::Evaluate, &config, None, true).unwrap();

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/eval/report.json")).unwrap()).unwrap();
    for key in ["precision", "recall", "f1", "coverage"] {
        assert_eq!(report[key], 1.0, "{key}");
    }
    let (back, _) = SpeciesTraitMatrix::read_csv(&path).unwrap();
    assert_eq!(back, m);
}

#[test]
fn stages_out_of_order_name_the_missing_step() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_demo_config(dir.path(), |_| {});
    match run_command(Command::Detect, &config, None, true) {
        Err(e @ PipelineError::MissingInput { .. }) => assert!(e.to_string().contains("harvest"), "{e}"),
        other => panic!("expected a missing input error, got {other:?}"),
    }
}

#[test]
fn offline_harvest_needs_a_mock_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_demo_config(dir.path(), |cfg| cfg.harvest.mock_corpus = None);
    assert!(matches!(
        run_command(Command::Harvest, &config, None, true),
        Err(PipelineError::Offline(_))
    ));
}

#[test]
fn unreachable_model_endpoint_fails_with_its_address() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let endpoint = format!("http://127.0.0.1:{port}/v1/chat/completions");
    let dir = tempfile::tempdir().unwrap();
    let config = common::write_demo_config(dir.path(), |cfg| {
        cfg.extractor.backend = florafill::pipeline::BackendKind::Http;
        cfg.extractor.llm = Some(serde_json::json!({
            "endpoint_url": endpoint,
            "max_retries": 0,
            "timeout": 2000,
        }));
    });
    for cmd in [
        Command::Harvest,
        Command::BuildCorpus,
        Command::TrainDetector,
        Command::Detect,
    ] {
        run_command(cmd, &config, None, true).unwrap();
    }

    let out = Process::new(env!("CARGO_BIN_EXE_florafill"))
        .args(["extract", "--config"])
        .arg(&config)
        .env("MISTRAL_API_KEY", "test-key")
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(&format!("127.0.0.1:{port}")), "{stderr}");
    assert!(!dir.path().join("out/predicted_matrix.csv").exists());
}

#[test]
fn cli_rejects_unknown_commands() {
    let out = Process::new(env!("CARGO_BIN_EXE_florafill"))
        .args(["harvst", "--config", "x.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
