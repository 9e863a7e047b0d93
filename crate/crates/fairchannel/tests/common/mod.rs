#![allow(dead_code)]

use std::path::PathBuf;

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> PathBuf {
    manifest_dir().join("tests/fixtures").join(name)
}

pub fn compas_schema() -> PathBuf {
    manifest_dir().join("schemas/compas.toml")
}

/// The real COMPAS export, from `COMPAS_CSV` or `data/` at the workspace root.
pub fn compas_data() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("COMPAS_CSV").map(PathBuf::from) {
        return p.is_file().then_some(p);
    }
    let p = manifest_dir().join("../../data/compas-scores-two-years.csv");
    p.is_file().then_some(p)
}
