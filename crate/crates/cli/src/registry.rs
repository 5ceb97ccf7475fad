//! Directory of immutable run records plus an `index.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::artifacts::{write_atomic, ArtifactSet};
use crate::error::{CliError, CliResult};
use crate::experiments::execute;
use crate::spec::{hex_digest, ExperimentSpec, Target};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Passed,
    /// Ran to completion but some check in the summary failed.
    Failed,
    Error { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub target: Target,
    pub spec_hash: String,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    pub artifacts: Vec<String>,
    pub status: RunStatus,
    pub summary: Value,
    /// SHA-256 of the compact JSON summary.
    pub summary_hash: String,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub name: String,
    pub spec_hash: String,
    pub summary_hash: String,
    pub record: String,
    pub status: RunStatus,
}

#[derive(Debug)]
pub struct Registry {
    root: PathBuf,
    lock: Mutex<()>,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl Registry {
    pub fn open(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("records"))?;
        Ok(Self { root, lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.json")
    }

    pub fn entries(&self) -> CliResult<Vec<IndexEntry>> {
        match fs::read(self.index_path()) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn load(&self, entry: &IndexEntry) -> CliResult<RunRecord> {
        Ok(serde_json::from_slice(&fs::read(self.root.join(&entry.record))?)?)
    }

    /// Rejects a name already registered under a different spec hash.
    pub fn check_name(&self, spec: &ExperimentSpec) -> CliResult<()> {
        let hash = spec.hash();
        match self.entries()?.iter().find(|e| e.name == spec.name) {
            Some(e) if e.spec_hash != hash => {
                Err(CliError::invalid(format!("name {:?} is registered with a different spec ({})", spec.name, &e.spec_hash[..12])))
            }
            _ => Ok(()),
        }
    }

    /// Stores a finalized record. A record for an existing spec hash is never
    /// rewritten; its summary hash must match the stored one.
    pub fn commit(&self, record: &RunRecord) -> CliResult<()> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut entries = self.entries()?;
        if let Some(e) = entries.iter().find(|e| e.spec_hash == record.spec_hash) {
            if e.summary_hash != record.summary_hash {
                return Err(CliError::Determinism(format!(
                    "{}: summary hash {} differs from registered {}",
                    record.name, record.summary_hash, e.summary_hash
                )));
            }
            return Ok(());
        }
        let rel = format!("records/{}-{}.json", record.name, &record.spec_hash[..12]);
        write_atomic(&self.root.join(&rel), &serde_json::to_vec_pretty(record)?)?;
        entries.push(IndexEntry {
            name: record.name.clone(),
            spec_hash: record.spec_hash.clone(),
            summary_hash: record.summary_hash.clone(),
            record: rel,
            status: record.status.clone(),
        });
        write_atomic(&self.index_path(), &serde_json::to_vec_pretty(&entries)?)?;
        Ok(())
    }
}

/// Validates, executes and registers one spec. Downstream failures end up in
/// the record's status; only spec, registry and I/O problems are errors.
pub fn run(spec: &ExperimentSpec, registry: &Registry, out_root: &Path) -> CliResult<RunRecord> {
    let params = spec.validate()?;
    registry.check_name(spec)?;
    let dir = spec.out_dir.clone().unwrap_or_else(|| out_root.join(&spec.name));
    let started_unix = unix_now();
    let clock = Instant::now();
    let mut art = ArtifactSet::new(dir)?;
    let (status, summary) = match execute(&params, spec.seed, &mut art) {
        Ok(o) if o.passed => (RunStatus::Passed, o.summary),
        Ok(o) => (RunStatus::Failed, o.summary),
        Err(e) => (RunStatus::Error { message: e.to_string() }, json!({ "error": e.to_string() })),
    };
    let record = RunRecord {
        name: spec.name.clone(),
        target: spec.target,
        spec_hash: spec.hash(),
        seed: spec.seed,
        started_unix,
        finished_unix: unix_now(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        artifacts: art.into_files(),
        summary_hash: hex_digest(&serde_json::to_vec(&summary)?),
        status,
        summary,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    registry.commit(&record)?;
    Ok(record)
}

/// Runs independent specs on the rayon pool after validating the whole batch.
pub fn run_batch(specs: &[ExperimentSpec], registry: &Registry, out_root: &Path) -> CliResult<Vec<CliResult<RunRecord>>> {
    for (k, s) in specs.iter().enumerate() {
        s.validate()?;
        registry.check_name(s)?;
        if specs[..k].iter().any(|t| t.name == s.name && t.hash() != s.hash()) {
            return Err(CliError::invalid(format!("name {:?} appears twice with different specs", s.name)));
        }
    }
    Ok(specs.par_iter().map(|s| run(s, registry, out_root)).collect())
}

/// Reads either a single spec object or an array of specs.
pub fn read_specs(text: &str) -> CliResult<Vec<ExperimentSpec>> {
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::invalid(e.to_string()))?;
    let parse = |v: Value| serde_json::from_value::<ExperimentSpec>(v).map_err(|e| CliError::invalid(e.to_string()));
    match v {
        Value::Array(items) => items.into_iter().map(parse).collect(),
        other => Ok(vec![parse(other)?]),
    }
}
