//! Content-addressed record/replay cache.
//!
//! Layout: `<dir>/<first two hex chars>/<digest>.json`, one file per
//! request. The digest is SHA-256 over the canonical JSON of the backend id
//! and the request (object keys sorted). Writes go through a temp file and a
//! rename, so readers never observe a half-written entry.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::digest::{atomic_write, canonical_json, sha256_hex, sharded_path};

use super::{Backend, CompletionRequest, CompletionResponse, LlmError};

/// File recording which backend populated a cache directory.
pub const BACKEND_ID_FILE: &str = "backend_id";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn digest(&self) -> &str {
        &self.0
    }

    pub fn path_in(&self, dir: &Path) -> PathBuf {
        sharded_path(dir, &self.0)
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn cache_key(backend_id: &str, req: &CompletionRequest) -> CacheKey {
    let canon = canonical_json(&serde_json::json!({
        "backend_id": backend_id,
        "request": req,
    }));
    CacheKey(sha256_hex(canon.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CacheMode {
    /// Serve hits from disk, forward misses to the backend and record them.
    #[default]
    ReadWrite,
    /// Serve hits from disk; a miss is an error and the backend is never called.
    ReplayOnly,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    key: String,
    backend_id: String,
    request: CompletionRequest,
    texts: Vec<String>,
    timestamp: String,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LlmError {
    LlmError::Io(format!("{}: {e}", path.display()))
}

fn load(path: &Path, req: &CompletionRequest) -> Result<Option<Vec<String>>, LlmError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(path, e)),
    };
    let entry: Entry = serde_json::from_slice(&bytes)
        .map_err(|_| LlmError::CacheCorrupt(path.display().to_string()))?;
    if entry.texts.len() != req.n_samples as usize {
        return Err(LlmError::CacheCorrupt(path.display().to_string()));
    }
    Ok(Some(entry.texts))
}

fn store(
    dir: &Path,
    key: &CacheKey,
    backend_id: &str,
    req: &CompletionRequest,
    texts: &[String],
) -> Result<(), LlmError> {
    let path = key.path_in(dir);
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let id_file = dir.join(BACKEND_ID_FILE);
    if !id_file.exists() {
        std::fs::write(&id_file, backend_id).map_err(|e| io_err(&id_file, e))?;
    }
    let entry = Entry {
        key: key.digest().to_string(),
        backend_id: backend_id.to_string(),
        request: req.clone(),
        texts: texts.to_vec(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    let json = serde_json::to_vec_pretty(&entry).expect("cache entry serializes");
    atomic_write(&path, &json).map_err(|e| io_err(&path, e))?;
    Ok(())
}

/// One cached completion, without keeping a wrapper around.
pub fn cached_complete(
    cache_dir: &Path,
    backend: &dyn Backend,
    req: &CompletionRequest,
    mode: CacheMode,
) -> Result<CompletionResponse, LlmError> {
    req.validate()?;
    let key = cache_key(backend.id(), req);
    if let Some(texts) = load(&key.path_in(cache_dir), req)? {
        return Ok(CompletionResponse {
            texts,
            backend_id: backend.id().to_string(),
            cached: true,
        });
    }
    if mode == CacheMode::ReplayOnly {
        return Err(LlmError::ReplayMiss(key.to_string()));
    }
    let resp = super::complete(backend, req)?;
    store(cache_dir, &key, backend.id(), req, &resp.texts)?;
    Ok(CompletionResponse {
        cached: false,
        ..resp
    })
}

/// Backend wrapper that records to and replays from a cache directory.
pub struct CachedBackend {
    id: String,
    inner: Option<Arc<dyn Backend>>,
    dir: PathBuf,
    mode: CacheMode,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl CachedBackend {
    pub fn new(inner: Arc<dyn Backend>, dir: impl Into<PathBuf>, mode: CacheMode) -> Self {
        CachedBackend {
            id: inner.id().to_string(),
            inner: Some(inner),
            dir: dir.into(),
            mode,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    /// Replay-only cache with no backend behind it. The backend id is read
    /// from the directory's `backend_id` file.
    pub fn replay(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        let id_file = dir.join(BACKEND_ID_FILE);
        let id = std::fs::read_to_string(&id_file).map_err(|e| io_err(&id_file, e))?;
        Ok(CachedBackend {
            id: id.trim().to_string(),
            inner: None,
            dir,
            mode: CacheMode::ReplayOnly,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl Backend for CachedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        req.validate()?;
        let key = cache_key(&self.id, req);
        if let Some(texts) = load(&key.path_in(&self.dir), req)? {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(CompletionResponse {
                texts,
                backend_id: self.id.clone(),
                cached: true,
            });
        }
        self.misses.fetch_add(1, Ordering::SeqCst);
        let inner = match (&self.inner, self.mode) {
            (Some(inner), CacheMode::ReadWrite) => inner,
            _ => return Err(LlmError::ReplayMiss(key.to_string())),
        };
        let resp = super::complete(inner.as_ref(), req)?;
        store(&self.dir, &key, &self.id, req, &resp.texts)?;
        Ok(CompletionResponse {
            cached: false,
            ..resp
        })
    }
}
