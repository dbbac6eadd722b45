use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::ParamMap;

pub const MANIFEST_NAME: &str = "manifest.json";
const LOCK_NAME: &str = ".wqed.lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

/// A recorded invariant residual and the bound it must respect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
    /// Series file whose `norm` column reproduces `value` (norm drift only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, value: f64, bound: f64) -> Self {
        CheckRecord {
            name: name.into(),
            value,
            bound,
            passed: value <= bound,
            series: None,
        }
    }

    pub fn from_series(mut self, file: impl Into<String>) -> Self {
        self.series = Some(file.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// The configuration as resolved, defaults included.
    pub config: serde_json::Value,
    pub params: Vec<ParamMap>,
    pub basis_digests: Vec<String>,
    pub tolerance: f64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub checks: Vec<CheckRecord>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, config: serde_json::Value, tolerance: f64) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            config,
            params: Vec::new(),
            basis_digests: Vec::new(),
            tolerance,
            threads: rayon::current_num_threads(),
            wall_time_s: 0.0,
            checks: Vec::new(),
            files: Vec::new(),
        }
    }
}

pub fn hash_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Hash `files` (relative to `dir`) into the manifest and write it.
pub fn write_manifest(dir: &Path, manifest: &mut RunManifest, files: &[String]) -> Result<PathBuf> {
    manifest.files.clear();
    for name in files {
        let (sha256, bytes) = hash_file(&dir.join(name))?;
        manifest.files.push(FileRecord {
            name: name.clone(),
            sha256,
            bytes,
        });
    }
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Parse {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub files_checked: usize,
    pub problems: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

fn norm_drift_from_series(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |detail: &str| Error::Parse {
        path: path.to_path_buf(),
        detail: detail.into(),
    };
    let cols = text
        .lines()
        .find_map(|l| l.strip_prefix("# columns:"))
        .ok_or_else(|| perr("missing columns header"))?;
    let k = cols
        .split_whitespace()
        .position(|c| c == "norm")
        .ok_or_else(|| perr("no norm column"))?;
    let mut first = None;
    let mut drift: f64 = 0.0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let v: f64 = line
            .split_whitespace()
            .nth(k)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| perr("bad norm entry"))?;
        let n0 = *first.get_or_insert(v);
        drift = drift.max((v - n0).abs());
    }
    Ok(drift)
}

/// Re-hash every listed file and re-check the recorded residuals.
pub fn verify_dir(dir: &Path) -> Result<VerifyReport> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    let mut report = VerifyReport::default();
    for f in &manifest.files {
        let p = dir.join(&f.name);
        match hash_file(&p) {
            Ok((h, _)) if h == f.sha256 => report.files_checked += 1,
            Ok(_) => report.problems.push(format!("{}: content hash mismatch", f.name)),
            Err(e) => report.problems.push(format!("{}: {e}", f.name)),
        }
    }
    for c in &manifest.checks {
        if c.passed != (c.value <= c.bound) {
            report
                .problems
                .push(format!("{}: recorded verdict disagrees with {} vs bound {}", c.name, c.value, c.bound));
        }
        if !c.passed {
            report.problems.push(format!("{}: {} exceeds {}", c.name, c.value, c.bound));
        }
        if let Some(series) = &c.series {
            match norm_drift_from_series(&dir.join(series)) {
                Ok(d) if (d - c.value).abs() <= 1e-12 + 1e-9 * c.value.abs() => {}
                Ok(d) => report
                    .problems
                    .push(format!("{}: series gives {d:e}, manifest records {:e}", c.name, c.value)),
                Err(e) => report.problems.push(format!("{}: {e}", c.name)),
            }
        }
    }
    Ok(report)
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_NAME);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                Error::Resource(format!("{} is locked by another run", dir.display()))
            } else {
                Error::io(&path, e)
            }
        })?;
        let _ = writeln!(f, "{}", std::process::id());
        Ok(DirLock { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
