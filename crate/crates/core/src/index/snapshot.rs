//! Directory snapshots: `manifest.json` plus `entries.jsonl`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{IndexEntry, IndexError, IndexStore};

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const ENTRIES: &str = "entries.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub format_version: u32,
    pub dimension: usize,
    pub count: usize,
    /// SHA-256 of the `entries.jsonl` bytes.
    pub content_digest: String,
    /// Strategy fingerprint the vectors were produced with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<String>,
}

fn io_err(path: &Path, e: std::io::Error) -> IndexError {
    IndexError::Io(format!("{}: {e}", path.display()))
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), IndexError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

impl IndexStore {
    pub fn snapshot_save(&self, dir: &Path, embedding: Option<&str>) -> Result<SnapshotManifest, IndexError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut body = Vec::new();
        for entry in self.entries() {
            serde_json::to_writer(&mut body, entry).map_err(|e| IndexError::Io(e.to_string()))?;
            body.push(b'\n');
        }
        let manifest = SnapshotManifest {
            format_version: SNAPSHOT_FORMAT_VERSION,
            dimension: self.dimension(),
            count: self.len(),
            content_digest: hex::encode(Sha256::digest(&body)),
            embedding: embedding.map(str::to_owned),
        };
        write_atomically(&dir.join(ENTRIES), &body)?;
        let manifest_bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| IndexError::Io(e.to_string()))?;
        write_atomically(&dir.join(MANIFEST), &manifest_bytes)?;
        Ok(manifest)
    }

    pub fn read_manifest(dir: &Path) -> Result<SnapshotManifest, IndexError> {
        let path = dir.join(MANIFEST);
        let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| IndexError::CorruptSnapshot(format!("manifest: {e}")))
    }

    pub fn snapshot_exists(dir: &Path) -> bool {
        dir.join(MANIFEST).is_file()
    }

    pub fn snapshot_load(dir: &Path) -> Result<(IndexStore, SnapshotManifest), IndexError> {
        let manifest = Self::read_manifest(dir)?;
        if manifest.format_version != SNAPSHOT_FORMAT_VERSION {
            return Err(IndexError::CorruptSnapshot(format!("unsupported format version {}", manifest.format_version)));
        }
        if manifest.dimension == 0 {
            return Err(IndexError::CorruptSnapshot("dimension 0".into()));
        }
        let path = dir.join(ENTRIES);
        let body = fs::read(&path).map_err(|e| io_err(&path, e))?;
        let digest = hex::encode(Sha256::digest(&body));
        if digest != manifest.content_digest {
            return Err(IndexError::CorruptSnapshot(format!(
                "content digest {digest} does not match manifest {}",
                manifest.content_digest
            )));
        }
        let mut store = IndexStore::new(manifest.dimension);
        for (n, line) in body.split(|b| *b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let entry: IndexEntry = serde_json::from_slice(line)
                .map_err(|e| IndexError::CorruptSnapshot(format!("entries line {}: {e}", n + 1)))?;
            store
                .insert(entry)
                .map_err(|e| IndexError::CorruptSnapshot(format!("entries line {}: {e}", n + 1)))?;
        }
        if store.len() != manifest.count {
            return Err(IndexError::CorruptSnapshot(format!("manifest count {} but {} entries", manifest.count, store.len())));
        }
        Ok((store, manifest))
    }
}
