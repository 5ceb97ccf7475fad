//! Atomic file output and the CSV sidecar convention.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

/// Writes `bytes` to a sibling temp file, syncs it and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Collects the files one experiment writes into its output directory.
#[derive(Debug)]
pub struct ArtifactSet {
    dir: PathBuf,
    files: Vec<String>,
}

impl ArtifactSet {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// `stem.csv` plus the sidecar `stem.json` stating the property under test.
    pub fn csv(&mut self, stem: &str, csv: &str, tests: &str, extra: Value) -> std::io::Result<()> {
        let header = csv.lines().find(|l| !l.starts_with('#')).unwrap_or("");
        let mut sidecar = json!({
            "file": format!("{stem}.csv"),
            "tests": tests,
            "columns": header.split(',').collect::<Vec<_>>(),
        });
        if let (Value::Object(m), Value::Object(e)) = (&mut sidecar, extra) {
            m.extend(e);
        }
        self.write(&format!("{stem}.csv"), csv.as_bytes())?;
        self.write(&format!("{stem}.json"), &serde_json::to_vec_pretty(&sidecar)?)
    }

    pub fn json(&mut self, stem: &str, value: &Value) -> std::io::Result<()> {
        self.write(&format!("{stem}.json"), &serde_json::to_vec_pretty(value)?)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.push(self.dir.join(name).to_string_lossy().into_owned());
        Ok(())
    }

    pub fn into_files(self) -> Vec<String> {
        self.files
    }
}
