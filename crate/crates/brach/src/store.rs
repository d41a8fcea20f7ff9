//! Append-only solution store: one directory per weight profile, one JSON-lines
//! file per lattice size. The last line of a file is the current record.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use brach_core::warmstart::{GuessLibrary, SolutionRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub schema_version: u32,
    pub artifact_version: String,
    /// Milliseconds since the Unix epoch.
    pub created_ms: u64,
    pub spec_hash: String,
    pub record: SolutionRecord,
}

impl StoredRecord {
    pub fn new(record: SolutionRecord) -> Self {
        let created_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
        Self {
            schema_version: SCHEMA_VERSION,
            artifact_version: String::from(env!("CARGO_PKG_VERSION")),
            created_ms,
            spec_hash: profile_hash(&record.profile_key),
            record,
        }
    }
}

/// Hex SHA-256 of a profile key.
pub fn profile_hash(profile_key: &str) -> String {
    hex::encode(Sha256::digest(profile_key.as_bytes()))
}

#[derive(Debug)]
pub struct SolutionStore {
    root: PathBuf,
    write_lock: Mutex<()>,
}

impl SolutionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self { root, write_lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn profile_dir(&self, profile_key: &str) -> PathBuf {
        self.root.join(profile_hash(profile_key))
    }

    fn record_file(&self, profile_key: &str, n: usize) -> PathBuf {
        self.profile_dir(profile_key).join(format!("n{:03}.jsonl", n))
    }

    /// Appends a verified record. Records whose stored fidelity misses
    /// `1 - fidelity_tol` are refused.
    pub fn append(&self, record: &SolutionRecord, fidelity_tol: f64) -> Result<StoredRecord> {
        let fidelity = record.diagnostics.get("fidelity").copied().unwrap_or(f64::NAN);
        if !(fidelity >= 1.0 - fidelity_tol) {
            return Err(CliError::Verification(format!(
                "refusing to store N = {} with fidelity {}",
                record.n, fidelity
            )));
        }
        let stored = StoredRecord::new(record.clone());
        let line = serde_json::to_string(&stored)
            .map_err(|source| CliError::Json { path: self.record_file(&record.profile_key, record.n), source })?;
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let dir = self.profile_dir(&record.profile_key);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let key_file = dir.join("profile.txt");
        if !key_file.exists() {
            fs::write(&key_file, format!("{}\n", record.profile_key)).map_err(|e| CliError::io(&key_file, e))?;
        }
        let path = self.record_file(&record.profile_key, record.n);
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| CliError::io(&path, e))?;
        f.write_all(format!("{}\n", line).as_bytes()).map_err(|e| CliError::io(&path, e))?;
        Ok(stored)
    }

    /// Every record stored for one size, oldest first.
    pub fn history(&self, profile_key: &str, n: usize) -> Result<Vec<StoredRecord>> {
        let path = self.record_file(profile_key, n);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|source| CliError::Json { path: path.clone(), source }))
            .collect()
    }

    pub fn latest(&self, profile_key: &str, n: usize) -> Result<Option<StoredRecord>> {
        Ok(self.history(profile_key, n)?.pop())
    }

    /// Sizes with at least one record, ascending.
    pub fn sizes(&self, profile_key: &str) -> Result<Vec<usize>> {
        let dir = self.profile_dir(profile_key);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut out: Vec<usize> = fs::read_dir(&dir)
            .map_err(|e| CliError::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_prefix('n')?.strip_suffix(".jsonl")?.parse().ok()
            })
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Latest record of every stored size, as a warm-start library.
    pub fn library(&self, profile_key: &str) -> Result<GuessLibrary> {
        let mut lib = GuessLibrary::new();
        for n in self.sizes(profile_key)? {
            if let Some(r) = self.latest(profile_key, n)? {
                lib.insert(r.record);
            }
        }
        Ok(lib)
    }
}
