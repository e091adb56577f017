//! Append-only disk cache for provider responses.
//!
//! One file per (provider, model) pair, one JSON object per line with a
//! key and a value. Lookups load the whole file into memory; writes
//! append a line and flush. A partially written trailing line (crash
//! mid-write) is ignored on load, so a cache file is always usable.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HypoError, Result};

/// Stable cache key from labeled parts: hex SHA-256 over
/// length-prefixed segments, so distinct part lists cannot collide by
/// concatenation.
pub fn content_key(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let mut out = String::with_capacity(64);
    for byte in hasher.finalize() {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    value: String,
}

/// Line-delimited key/value cache backed by a single append-only file.
#[derive(Debug)]
pub struct DiskCache {
    path: PathBuf,
    inner: Mutex<CacheInner>,
}

#[derive(Debug)]
struct CacheInner {
    map: HashMap<String, String>,
    file: File,
}

impl DiskCache {
    /// Open (or create) the cache file at `path`, loading existing
    /// entries. Later entries for the same key win. Bytes after the
    /// last newline are a torn append from an interrupted writer: they
    /// are dropped and the file is truncated back to the last complete
    /// line, so subsequent appends cannot fuse with the fragment. A
    /// malformed *complete* line is a schema error.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(|e| HypoError::io(parent, e))?;
            }
        }
        let mut map = HashMap::new();
        let mut truncate_to: Option<u64> = None;
        if path.exists() {
            let bytes = fs::read(path).map_err(|e| HypoError::io(path, e))?;
            let valid_len = bytes
                .iter()
                .rposition(|&b| b == b'\n')
                .map_or(0, |pos| pos + 1);
            if valid_len < bytes.len() {
                log::warn!(
                    "dropping {} bytes of torn trailing entry in {}",
                    bytes.len() - valid_len,
                    path.display()
                );
                truncate_to = Some(valid_len as u64);
            }
            let text = std::str::from_utf8(&bytes[..valid_len])
                .map_err(|e| HypoError::schema(path, 0, format!("not UTF-8: {e}")))?;
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheLine = serde_json::from_str(line)
                    .map_err(|e| HypoError::schema(path, idx + 1, e.to_string()))?;
                map.insert(entry.key, entry.value);
            }
        }
        if let Some(len) = truncate_to {
            let f = OpenOptions::new()
                .write(true)
                .open(path)
                .map_err(|e| HypoError::io(path, e))?;
            f.set_len(len).map_err(|e| HypoError::io(path, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| HypoError::io(path, e))?;
        Ok(DiskCache {
            path: path.to_path_buf(),
            inner: Mutex::new(CacheInner { map, file }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.inner.lock().unwrap().map.get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert and persist one entry. The line is flushed before the
    /// lock is released so readers never observe a lost update.
    pub fn put(&self, key: &str, value: &str) -> Result<()> {
        let line = serde_json::to_string(&CacheLine {
            key: key.to_string(),
            value: value.to_string(),
        })
        .map_err(|e| HypoError::Contract(format!("serialize cache line: {e}")))?;
        let mut inner = self.inner.lock().unwrap();
        writeln!(inner.file, "{line}").map_err(|e| HypoError::io(&self.path, e))?;
        inner.file.flush().map_err(|e| HypoError::io(&self.path, e))?;
        inner.map.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Fetch-or-compute: on a miss, run `compute` and persist its
    /// result.
    pub fn get_or_insert_with<F>(&self, key: &str, compute: F) -> Result<String>
    where
        F: FnOnce() -> Result<String>,
    {
        if let Some(hit) = self.get(key) {
            return Ok(hit);
        }
        let value = compute()?;
        self.put(key, &value)?;
        Ok(value)
    }
}
