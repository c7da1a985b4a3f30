//! Append-only JSONL embedding cache.
//!
//! Each line is `{"embedder":..,"id":..,"hash":..,"vector":[..]}`. Floats are
//! written as shortest round-trip decimals, so a reload is bit-exact. A
//! truncated or unparsable final line (an interrupted append) is cut off with
//! a warning; corruption anywhere else is an error.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::EmbeddingVector;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache {path}: corrupt line {line_number}")]
    Corrupt { path: PathBuf, line_number: usize },
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    embedder: String,
    id: String,
    hash: String,
    vector: Vec<f64>,
}

type Key = (String, String, String);

struct State {
    entries: HashMap<Key, EmbeddingVector>,
    sink: Option<(PathBuf, File)>,
}

/// Embedding cache keyed by (embedder name, example id, text hash).
/// Reads are shared; writes go through one lock and one file handle.
pub struct EmbeddingCache {
    state: Mutex<State>,
}

impl std::fmt::Debug for EmbeddingCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingCache")
            .field("len", &self.len())
            .finish()
    }
}

impl Default for EmbeddingCache {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self {
            state: Mutex::new(State {
                entries: HashMap::new(),
                sink: None,
            }),
        }
    }

    /// Opens (creating if needed) a cache file and loads its entries.
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let io = |source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        };
        let contents = match fs::read(path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io(e)),
        };

        let mut entries = HashMap::new();
        let mut good_len = 0usize;
        let mut offset = 0usize;
        let mut line_number = 0usize;
        let mut truncate_at = None;
        while offset < contents.len() {
            line_number += 1;
            let end = contents[offset..]
                .iter()
                .position(|&b| b == b'\n')
                .map(|p| offset + p);
            let line_end = end.unwrap_or(contents.len());
            let parsed = std::str::from_utf8(&contents[offset..line_end])
                .ok()
                .and_then(|s| serde_json::from_str::<CacheLine>(s).ok())
                .and_then(|l| {
                    EmbeddingVector::from_unit(l.vector)
                        .ok()
                        .map(|v| ((l.embedder, l.id, l.hash), v))
                });
            let is_last = end.is_none_or(|e| e + 1 >= contents.len());
            match parsed {
                // An unterminated final line is an interrupted append even if it parses.
                Some(_) if end.is_none() => {
                    truncate_at = Some(good_len);
                    break;
                }
                Some((key, v)) => {
                    entries.insert(key, v);
                    good_len = line_end + 1;
                }
                None if is_last => {
                    truncate_at = Some(good_len);
                    break;
                }
                None => {
                    return Err(CacheError::Corrupt {
                        path: path.to_path_buf(),
                        line_number,
                    })
                }
            }
            offset = line_end + 1;
        }

        if let Some(len) = truncate_at {
            log::warn!(
                "cache {}: dropping incomplete trailing line {line_number}",
                path.display()
            );
            let file = OpenOptions::new().write(true).open(path).map_err(io)?;
            file.set_len(len as u64).map_err(io)?;
        }

        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        Ok(Self {
            state: Mutex::new(State {
                entries,
                sink: Some((path.to_path_buf(), file)),
            }),
        })
    }

    pub fn get(&self, embedder: &str, id: &str, hash: &str) -> Option<EmbeddingVector> {
        let state = self.state.lock().expect("cache lock poisoned");
        state
            .entries
            .get(&(embedder.to_string(), id.to_string(), hash.to_string()))
            .cloned()
    }

    pub fn insert(
        &self,
        embedder: &str,
        id: &str,
        hash: &str,
        vector: &EmbeddingVector,
    ) -> Result<(), CacheError> {
        let mut state = self.state.lock().expect("cache lock poisoned");
        if let Some((path, file)) = state.sink.as_mut() {
            let line = CacheLine {
                embedder: embedder.to_string(),
                id: id.to_string(),
                hash: hash.to_string(),
                vector: vector.values().to_vec(),
            };
            let mut buf = serde_json::to_vec(&line).expect("cache line serializes");
            buf.push(b'\n');
            file.write_all(&buf).map_err(|source| CacheError::Io {
                path: path.clone(),
                source,
            })?;
        }
        state.entries.insert(
            (embedder.to_string(), id.to_string(), hash.to_string()),
            vector.clone(),
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.state
            .lock()
            .expect("cache lock poisoned")
            .entries
            .len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
