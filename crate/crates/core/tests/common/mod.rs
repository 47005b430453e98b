#![allow(dead_code)]

use std::path::{Path, PathBuf};

use florafill::pipeline::PipelineConfig;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn demo_config() -> PipelineConfig {
    PipelineConfig::load(fixtures().join("demo/demo.json")).expect("demo config loads")
}

/// Writes the demo configuration with its cache and output redirected under `dir`.
pub fn write_demo_config(dir: &Path, edit: impl FnOnce(&mut PipelineConfig)) -> PathBuf {
    let mut cfg = demo_config();
    cfg.cache_dir = dir.join("cache");
    cfg.output_dir = dir.join("out");
    edit(&mut cfg);
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    path
}

/// Every regular file below `dir` with its bytes, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.clone(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
