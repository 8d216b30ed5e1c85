use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedId {
    pub id: String,
    pub index: usize,
    pub class: String,
}

/// Resume state for one shard, stored next to the shard's segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub shard: usize,
    pub nodes: usize,
    /// Highest corpus index whose outcome is durable.
    pub last_processed_index: Option<usize>,
    pub processed: usize,
    pub failed_ids: Vec<FailedId>,
}

impl Checkpoint {
    pub fn new(shard: usize, nodes: usize) -> Self {
        Self { shard, nodes, last_processed_index: None, processed: 0, failed_ids: Vec::new() }
    }

    pub fn path(store_root: &Path) -> PathBuf {
        store_root.join(CHECKPOINT_FILE)
    }

    pub fn load(store_root: &Path) -> std::io::Result<Option<Self>> {
        let path = Self::path(store_root);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Writes through a temporary file and a rename.
    pub fn save(&self, store_root: &Path) -> std::io::Result<()> {
        let path = Self::path(store_root);
        let tmp = store_root.join(format!("{CHECKPOINT_FILE}.tmp"));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&serde_json::to_vec_pretty(self).map_err(std::io::Error::other)?)?;
        f.write_all(b"\n")?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, &path)
    }

    pub fn advance(&mut self, index: usize) {
        self.last_processed_index = Some(self.last_processed_index.map_or(index, |i| i.max(index)));
    }
}
