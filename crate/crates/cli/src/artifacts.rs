//! Artifact writing: CSV tables with 17 significant digits, JSON reports and
//! the run manifest with SHA-256 checksums.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Shortest exact-enough rendering: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Gate {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value <= threshold, value, threshold }
    }

    /// Boolean gate recorded as 1/0 against 1.
    pub fn flag(name: &str, ok: bool) -> Self {
        Self { name: name.into(), passed: ok, value: if ok { 1.0 } else { 0.0 }, threshold: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    pub reason: String,
    /// Contraction factors or other trace values attached to the error.
    #[serde(default)]
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub status: String,
    pub gates: Vec<Gate>,
    /// Headline numbers, rendered by `report` as is.
    pub summary: BTreeMap<String, f64>,
    #[serde(default)]
    pub failure: Option<Failure>,
    pub artifacts: Vec<ArtifactEntry>,
}

impl Manifest {
    pub fn passed(&self) -> bool {
        self.status == "pass"
    }
}

/// Output directory of one run; collects artifacts as they are written.
pub struct RunDir {
    pub path: PathBuf,
    entries: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl RunDir {
    pub fn create(path: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self { path, entries: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.path.join(name);
        fs::write(&p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        self.entries.retain(|e| e.name != name);
        self.entries.push(ArtifactEntry { name: name.into(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes a CSV table; every column has the same length.
    pub fn write_csv(&mut self, name: &str, header: &[&str], columns: &[&[f64]]) -> Result<(), CliError> {
        let rows = columns.first().map_or(0, |c| c.len());
        debug_assert!(columns.iter().all(|c| c.len() == rows));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
        for r in 0..rows {
            w.write_record(columns.iter().map(|c| fmt_f64(c[r]))).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &bytes)
    }

    pub fn finish(
        self,
        command: &str,
        config: &RunConfig,
        gates: Vec<Gate>,
        summary: BTreeMap<String, f64>,
        failure: Option<Failure>,
    ) -> Result<(PathBuf, Manifest), CliError> {
        let passed = failure.is_none() && gates.iter().all(|g| g.passed);
        let manifest = Manifest {
            tool: "fbp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            status: if passed { "pass" } else { "fail" }.into(),
            gates,
            summary,
            failure,
            artifacts: self.entries,
        };
        let path = self.path.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok((path, manifest))
    }
}

/// Loads a manifest and checks every listed artifact against its checksum.
pub fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Corrupt(format!("{}: {e}", path.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Corrupt(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    for entry in &manifest.artifacts {
        let p = dir.join(&entry.name);
        let bytes = fs::read(&p).map_err(|e| CliError::Corrupt(format!("{}: {e}", p.display())))?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(CliError::Corrupt(format!("checksum mismatch for {}", entry.name)));
        }
    }
    Ok(manifest)
}

/// Reads named numeric columns from a CSV artifact.
pub fn read_csv_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let corrupt = |e: String| CliError::Corrupt(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| corrupt(e.to_string()))?;
    let header = r.headers().map_err(|e| corrupt(e.to_string()))?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| header.iter().position(|h| h == *n).ok_or_else(|| corrupt(format!("missing column {n}"))))
        .collect::<Result<_, _>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| corrupt(e.to_string()))?;
        for (c, &i) in idx.iter().enumerate() {
            let v: f64 = rec.get(i).unwrap_or("").parse().map_err(|_| corrupt(format!("bad number in {}", names[c])))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}
