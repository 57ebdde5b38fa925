use std::fs;
use std::path::{Path, PathBuf};

use super::{write_atomic, StorageError};
use crate::graph::DiffusionNetwork;

/// On-disk home for networks evicted from memory, one JSON file per meme id.
#[derive(Debug, Clone)]
pub struct SpillStore {
    dir: PathBuf,
}

impl SpillStore {
    pub fn open(dir: &Path) -> Result<Self, StorageError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn path(&self, meme_id: u32) -> PathBuf {
        self.dir.join(format!("meme-{meme_id:08}.json"))
    }

    pub fn write(&self, meme_id: u32, network: &DiffusionNetwork) -> Result<(), StorageError> {
        let bytes = serde_json::to_vec(network).expect("network serializes");
        write_atomic(&self.path(meme_id), &bytes)?;
        Ok(())
    }

    pub fn read(&self, meme_id: u32) -> Result<DiffusionNetwork, StorageError> {
        let path = self.path(meme_id);
        let bytes = fs::read(&path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| StorageError::Corrupt { what: path.display().to_string(), reason: e.to_string() })
    }

    pub fn remove(&self, meme_id: u32) -> Result<(), StorageError> {
        match fs::remove_file(self.path(meme_id)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }
}
