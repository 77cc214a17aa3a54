//! Output directory with a hashed manifest of every file written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qpe_core::{qpf, SampledField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub files: BTreeMap<String, FileEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Files whose current content differs from the recorded hash.
    pub fn mismatches(&self, dir: &Path) -> Vec<String> {
        let mut bad = vec![];
        for (name, entry) in &self.files {
            match fs::read(dir.join(name)) {
                Ok(bytes) if hash(&bytes) == entry.sha256 => {}
                Ok(_) => bad.push(format!("{name}: content changed")),
                Err(_) => bad.push(format!("{name}: missing")),
            }
        }
        bad
    }
}

pub fn hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects the files of one run.
pub struct Output {
    dir: PathBuf,
    files: BTreeMap<String, FileEntry>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let bytes = fs::read(self.dir.join(name))?;
        self.files.insert(name.to_string(), FileEntry { sha256: hash(&bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    fn target(&self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(path)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        fs::write(self.target(name)?, text).with_context(|| format!("writing {name}"))?;
        self.record(name)
    }

    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.target(name)?).with_context(|| format!("writing {name}"))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.record(name)
    }

    /// A QPF1 field plus its JSON sidecar.
    pub fn field(&mut self, name: &str, field: &SampledField, t: f64, provenance: serde_json::Value) -> Result<()> {
        let path = self.target(name)?;
        qpf::write(&path, field, t, provenance).with_context(|| format!("writing {name}"))?;
        self.record(name)?;
        self.record(&format!("{name}.json"))
    }

    /// Writes the manifest last so that it covers every other file.
    pub fn finish(self, command: &str, config: serde_json::Value) -> Result<Manifest> {
        let manifest = Manifest {
            tool: "qpe".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            files: self.files,
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(manifest)
    }
}

/// One verdict line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub check: String,
    pub value: f64,
    pub threshold: Option<f64>,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(check: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { check: check.into(), value, threshold: Some(threshold), pass: value <= threshold }
    }

    pub fn at_least(check: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { check: check.into(), value, threshold: Some(threshold), pass: value >= threshold }
    }

    pub fn info(check: impl Into<String>, value: f64) -> Self {
        Self { check: check.into(), value, threshold: None, pass: true }
    }

    pub fn flag(check: impl Into<String>, ok: bool) -> Self {
        Self { check: check.into(), value: f64::from(u8::from(ok)), threshold: Some(1.0), pass: ok }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(command: &str, checks: Vec<Check>) -> Self {
        Self { command: command.into(), pass: checks.iter().all(|c| c.pass), checks }
    }
}
