//! Corpus records, on-disk layout, validation, statistics and
//! augmentation of external Q&A corpora.
//!
//! A corpus directory holds `corpus.jsonl` (one record per line),
//! `images/<figure_id>.svg` and `manifest.json`.

pub mod augment;
pub mod pipeline;
pub mod stats;

pub use augment::{augment_corpus, read_sources, AugmentOutcome, AugmentationRecord, SourceItem};
pub use pipeline::{run_generation, Counts, RunOptions, RunOutput};
pub use stats::{compute_stats, CorpusStats, Embedder, TrigramEmbedder};

use crate::catalog::Catalog;
use crate::engine::{compute_ledger, pattern_key, render_svg, Patch, PropertyLedger};
use crate::geometry::Scene;
use crate::reasoner::{validate_answer, validate_step, Grounding, QaPair, QaStatus, ReasoningStep};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const IMAGE_DIR: &str = "images";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("record {figure_id}: {message}")]
    Schema { figure_id: String, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub figure_id: String,
    /// Image path relative to the corpus directory.
    pub image: String,
    pub description: String,
    pub patches: Vec<Patch>,
    pub scene: Scene,
    pub ledger: PropertyLedger,
    pub steps: Vec<ReasoningStep>,
    pub qa: Vec<QaPair>,
    pub theorems: Vec<String>,
    /// Substrate kinds.
    pub substrates: Vec<String>,
    pub pattern: String,
}

pub fn figure_id(index: u64) -> String {
    format!("fig{index:06}")
}

pub fn image_path(figure_id: &str) -> String {
    format!("{IMAGE_DIR}/{figure_id}.svg")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub catalog_hash: String,
    pub records_hash: String,
    pub complete: bool,
    pub counts: Counts,
    /// Effective configuration of the run.
    pub config: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn catalog_hash(catalog: &Catalog) -> String {
    sha256_hex(catalog.to_toml().as_bytes())
}

/// Hash of the canonical JSON form of a configuration.
pub fn config_hash(config: &serde_json::Value) -> String {
    sha256_hex(serde_json::to_string(config).expect("json value").as_bytes())
}

/// Structural checks a record must pass before it is written.
pub fn check_record(r: &DatasetRecord) -> Result<(), String> {
    if r.figure_id.is_empty() {
        return Err("empty figure id".into());
    }
    if r.image != image_path(&r.figure_id) {
        return Err(format!("image path {:?} does not match the figure id", r.image));
    }
    if r.pattern != pattern_key(&r.scene) {
        return Err(format!("pattern {:?} does not match the scene", r.pattern));
    }
    let kinds: Vec<&str> = r.scene.substrates.iter().map(|s| s.kind.as_str()).collect();
    if kinds != r.substrates.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err("substrate kinds do not match the scene".into());
    }
    for (i, s) in r.steps.iter().enumerate() {
        if s.index != i {
            return Err(format!("step {i} carries index {}", s.index));
        }
    }
    for (k, p) in r.qa.iter().enumerate() {
        if p.status != QaStatus::Accepted {
            return Err(format!("qa {k} is not accepted"));
        }
        if p.chain.is_empty() || p.chain.iter().any(|&j| j >= r.steps.len()) {
            return Err(format!("qa {k} has an invalid supporting chain"));
        }
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(bytes).map_err(io(&tmp))?;
    f.sync_all().map_err(io(&tmp))?;
    fs::rename(&tmp, path).map_err(io(path))
}

/// Serializes records one per line.
pub fn to_jsonl(records: &[DatasetRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect()
}

/// Writes the corpus, its images and the manifest. Every record is
/// checked first, so a schema violation leaves the directory untouched.
pub fn write_corpus(
    out: &Path,
    records: &[DatasetRecord],
    config: serde_json::Value,
    catalog: &Catalog,
    counts: Counts,
    complete: bool,
) -> Result<Manifest, DatasetError> {
    let mut ids = BTreeSet::new();
    for r in records {
        check_record(r).map_err(|message| DatasetError::Schema { figure_id: r.figure_id.clone(), message })?;
        if !ids.insert(&r.figure_id) {
            return Err(DatasetError::Schema { figure_id: r.figure_id.clone(), message: "duplicate figure id".into() });
        }
    }
    fs::create_dir_all(out).map_err(io(out))?;
    let staging = out.join(format!("{IMAGE_DIR}.tmp"));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io(&staging))?;
    }
    fs::create_dir_all(&staging).map_err(io(&staging))?;
    for r in records {
        let p = staging.join(format!("{}.svg", r.figure_id));
        fs::write(&p, render_svg(&r.scene)).map_err(io(&p))?;
    }
    let images = out.join(IMAGE_DIR);
    if images.exists() {
        fs::remove_dir_all(&images).map_err(io(&images))?;
    }
    fs::rename(&staging, &images).map_err(io(&images))?;
    let body = to_jsonl(records);
    write_atomic(&out.join(CORPUS_FILE), body.as_bytes())?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_hash: config_hash(&config),
        catalog_hash: catalog_hash(catalog),
        records_hash: sha256_hex(body.as_bytes()),
        complete,
        counts,
        config,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
    write_atomic(&out.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

/// The JSONL file of a corpus given its directory or the file itself.
pub fn corpus_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(CORPUS_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Reads records; parse errors carry 1-based line numbers.
pub fn read_corpus(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let file = corpus_file(path);
    let text = fs::read_to_string(&file).map_err(io(&file))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Parse { path: file.clone(), line: i + 1, message: e.to_string() })
        })
        .collect()
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, DatasetError> {
    let p = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&p).map_err(io(&p))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Parse { path: p, line: e.line(), message: e.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// 1-based line of the record in the corpus file.
    pub line: usize,
    pub figure_id: String,
    pub detail: String,
}

/// Recomputes each ledger from the stored scene and re-runs the
/// deterministic checks on every pair. One violation per failing pair.
pub fn validate_corpus(records: &[DatasetRecord], catalog: &Catalog) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let v = |detail: String| Violation { line: i + 1, figure_id: r.figure_id.clone(), detail };
        if let Err(e) = check_record(r) {
            out.push(v(e));
            continue;
        }
        let ledger = compute_ledger(&r.scene);
        if ledger != r.ledger {
            out.push(v("stored ledger differs from the one recomputed from the scene".into()));
            continue;
        }
        let g = Grounding::new(&r.scene, &ledger, catalog);
        for (k, p) in r.qa.iter().enumerate() {
            let res = p
                .chain
                .iter()
                .try_for_each(|&j| validate_step(&r.steps[j], &g))
                .and_then(|_| validate_answer(&p.answer, &g));
            if let Err(e) = res {
                out.push(v(format!("qa {k}: {e}")));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::bundled;

    #[test]
    fn empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let cat = bundled();
        let m = write_corpus(dir.path(), &[], serde_json::json!({}), &cat, Counts::default(), true).unwrap();
        assert_eq!(m.counts.qa_accepted, 0);
        assert_eq!(fs::read_to_string(dir.path().join(CORPUS_FILE)).unwrap(), "");
        assert!(read_corpus(dir.path()).unwrap().is_empty());
        assert_eq!(read_manifest(dir.path()).unwrap(), m);
    }

    #[test]
    fn parse_errors_have_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(CORPUS_FILE);
        fs::write(&p, "\n{\"figure_id\": 3}\n").unwrap();
        match read_corpus(dir.path()) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
