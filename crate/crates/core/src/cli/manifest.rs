use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

/// Provenance record of one command run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seeds: BTreeMap<String, u64>,
    pub tool_version: String,
    /// UTC, RFC 3339.
    pub timestamp: String,
    pub outputs: Vec<OutputEntry>,
}

/// Output directory that writes files atomically and remembers their digests.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

impl OutputDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(OutputDir { dir, entries: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        atomic_write(&path, bytes)?;
        self.entries.retain(|e| e.path != name);
        self.entries.push(OutputEntry { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Writes the manifest; call after every other output.
    pub fn finish(self, command: &str, config_digest: &str, seeds: &BTreeMap<String, u64>) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_digest: config_digest.to_string(),
            seeds: seeds.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            outputs: self.entries,
        };
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        atomic_write(&self.dir.join(format!("{command}{MANIFEST_SUFFIX}")), &text)?;
        Ok(manifest)
    }
}

/// Result of checking an output directory against its manifests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub manifests: usize,
    pub files: usize,
    pub problems: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Every file must be listed by exactly one manifest with a matching digest.
pub fn self_audit(dir: &Path) -> Result<AuditReport> {
    let mut report = AuditReport::default();
    let mut refs: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    let mut files = Vec::new();
    let listing = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in listing {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            report.problems.push(format!("{name}: unexpected subdirectory"));
        } else if name.ends_with(MANIFEST_SUFFIX) {
            let text = fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
            match serde_json::from_slice::<RunManifest>(&text) {
                Ok(m) => {
                    report.manifests += 1;
                    for o in m.outputs {
                        refs.entry(o.path).or_default().push((name.clone(), o.sha256));
                    }
                }
                Err(e) => report.problems.push(format!("{name}: unreadable manifest ({e})")),
            }
        } else {
            files.push(name);
        }
    }
    files.sort();
    report.files = files.len();
    for f in &files {
        match refs.get(f).map(Vec::as_slice) {
            None | Some([]) => report.problems.push(format!("{f}: orphan output, listed by no manifest")),
            Some([(m, digest)]) => {
                let bytes = fs::read(dir.join(f)).map_err(|e| Error::io(dir.join(f), e))?;
                if &sha256_hex(&bytes) != digest {
                    report.problems.push(format!("{f}: digest differs from {m}"));
                }
            }
            Some(many) => {
                let names: Vec<&str> = many.iter().map(|(m, _)| m.as_str()).collect();
                report.problems.push(format!("{f}: listed by {} manifests ({})", many.len(), names.join(", ")));
            }
        }
    }
    for (f, by) in &refs {
        if !files.contains(f) {
            report.problems.push(format!("{f}: listed by {} but missing", by[0].0));
        }
    }
    Ok(report)
}
