use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{write_atomic, StorageError};

const SNAPSHOT_VERSION: u32 = 1;

/// Analytics state covering the first `log_offset` log entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotFile<T> {
    pub version: u32,
    pub log_offset: u64,
    pub state: T,
}

#[derive(Serialize)]
struct SnapshotRef<'a, T> {
    version: u32,
    log_offset: u64,
    state: &'a T,
}

/// Atomically replaces the snapshot at `path`.
pub fn write_snapshot<T: Serialize>(path: &Path, log_offset: u64, state: &T) -> Result<(), StorageError> {
    let bytes = serde_json::to_vec(&SnapshotRef { version: SNAPSHOT_VERSION, log_offset, state })
        .expect("snapshot serializes");
    write_atomic(path, &bytes)?;
    Ok(())
}

/// Reads the snapshot at `path`, if any.
pub fn read_snapshot<T: DeserializeOwned>(path: &Path) -> Result<Option<SnapshotFile<T>>, StorageError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let corrupt = |reason: String| StorageError::Corrupt { what: path.display().to_string(), reason };
    let file: SnapshotFile<T> = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
    if file.version != SNAPSHOT_VERSION {
        return Err(corrupt(format!("unsupported snapshot version {}", file.version)));
    }
    Ok(Some(file))
}
