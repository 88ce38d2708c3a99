//! Run manifests: tool version, canonical config hash, seed, timestamps, and
//! a checksummed inventory of emitted files.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use nucsense::Result;

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<FileEntry>,
}

/// Hash of the canonical (recursively key-sorted) JSON encoding; stable under
/// key reordering in the source document.
pub fn config_hash(doc: &serde_json::Value) -> String {
    let canonical = canonicalize(doc);
    let mut hasher = Sha256::new();
    hasher.update(canonical.to_string().as_bytes());
    hex(&hasher.finalize())
}

fn canonicalize(v: &serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::Object(map) => {
            let mut sorted: Vec<(&String, &serde_json::Value)> = map.iter().collect();
            sorted.sort_by_key(|(k, _)| k.as_str());
            let mut out = serde_json::Map::new();
            for (k, val) in sorted {
                out.insert(k.clone(), canonicalize(val));
            }
            serde_json::Value::Object(out)
        }
        serde_json::Value::Array(items) => {
            serde_json::Value::Array(items.iter().map(canonicalize).collect())
        }
        other => other.clone(),
    }
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let data = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&data);
    Ok((hex(&hasher.finalize()), data.len() as u64))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn collect(
        config_doc: &serde_json::Value,
        seed: u64,
        started_unix_ms: u128,
        outputs: &[PathBuf],
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(outputs.len());
        for p in outputs {
            let (sha256, bytes) = sha256_file(p)?;
            entries.push(FileEntry {
                path: p.clone(),
                sha256,
                bytes,
            });
        }
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(config_doc),
            seed,
            started_unix_ms,
            finished_unix_ms: now_ms(),
            outputs: entries,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_stable_under_key_reordering() {
        let a: serde_json::Value =
            serde_json::from_str(r#"{"b": 1, "a": {"y": 2, "x": [1, 2]}}"#).unwrap();
        let b: serde_json::Value =
            serde_json::from_str(r#"{"a": {"x": [1, 2], "y": 2}, "b": 1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let c: serde_json::Value = serde_json::from_str(r#"{"b": 2, "a": 1}"#).unwrap();
        assert_ne!(config_hash(&a), config_hash(&c));
    }
}
