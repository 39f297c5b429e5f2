//! Content hashing shared by the response caches.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// JSON with object keys sorted and no whitespace.
pub(crate) fn canonical_json<T: Serialize>(value: &T) -> String {
    // serde_json's Map is a BTreeMap here, so going through Value sorts keys.
    let v = serde_json::to_value(value).expect("value serializes to JSON");
    serde_json::to_string(&v).expect("JSON value serializes")
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<dir>/<first two hex chars>/<digest>.json`
pub(crate) fn sharded_path(dir: &std::path::Path, digest: &str) -> std::path::PathBuf {
    dir.join(&digest[..2]).join(format!("{digest}.json"))
}

/// Writes `bytes` to `path` through a temp file in the same directory and a
/// rename, creating parent directories.
pub(crate) fn atomic_write(path: &std::path::Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    let parent = path.parent().expect("path has a parent");
    std::fs::create_dir_all(parent)?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
