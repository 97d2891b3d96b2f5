use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::materials::MaterialProperties;

/// Hex SHA-256 over length-prefixed image bytes, tag and provider fingerprint.
pub fn cache_key(image: &[u8], tag: &str, fingerprint: &str) -> String {
    let mut h = Sha256::new();
    for part in [image, tag.as_bytes(), fingerprint.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    hex::encode(h.finalize())
}

/// One JSON file per key: `<dir>/<key>.json`.
#[derive(Debug, Clone)]
pub struct PropertyCache {
    dir: PathBuf,
}

impl PropertyCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        PropertyCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Cached properties, or `None` on a miss. Unreadable or invalid entries
    /// are reported and treated as misses.
    pub fn get(&self, key: &str) -> Option<MaterialProperties> {
        let path = self.path(key);
        let text = std::fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<MaterialProperties>(&text) {
            Ok(p) if p.validate().is_ok() => Some(p),
            _ => {
                log::warn!("ignoring corrupt cache entry {}", path.display());
                None
            }
        }
    }

    /// Store atomically (write to a temporary file, then rename). Failures
    /// only cost a future cache miss, so they are logged, not returned.
    pub fn put(&self, key: &str, props: &MaterialProperties) {
        let result = (|| -> std::io::Result<()> {
            std::fs::create_dir_all(&self.dir)?;
            let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
            tmp.write_all(serde_json::to_string_pretty(props)?.as_bytes())?;
            tmp.persist(self.path(key)).map_err(|e| e.error)?;
            Ok(())
        })();
        if let Err(e) = result {
            log::warn!("could not write cache entry in {}: {e}", self.dir.display());
        }
    }
}
