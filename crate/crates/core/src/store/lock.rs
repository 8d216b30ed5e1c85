use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use super::StoreError;

pub const LOCK_FILE: &str = "LOCK";

/// Single-writer lock: `<root>/LOCK` holding the owner's pid. A lock whose
/// owner is no longer running is taken over.
#[derive(Debug)]
pub(super) struct LockFile {
    path: PathBuf,
}

fn owner_alive(pid: &str) -> bool {
    let Ok(pid) = pid.trim().parse::<u32>() else {
        return false;
    };
    if cfg!(target_os = "linux") {
        Path::new("/proc").join(pid.to_string()).exists()
    } else {
        true
    }
}

impl LockFile {
    pub(super) fn acquire(root: &Path) -> Result<Self, StoreError> {
        let path = root.join(LOCK_FILE);
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    write!(f, "{}", std::process::id())
                        .and_then(|_| f.sync_all())
                        .map_err(|source| StoreError::Io { path: path.clone(), source })?;
                    return Ok(Self { path });
                }
                Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                    let pid = fs::read_to_string(&path).unwrap_or_default();
                    if owner_alive(&pid) {
                        return Err(StoreError::Locked { path: root.to_path_buf(), pid: pid.trim().to_string() });
                    }
                    tracing::warn!(lock = %path.display(), pid = pid.trim(), "removing stale store lock");
                    let _ = fs::remove_file(&path);
                }
                Err(source) => return Err(StoreError::Io { path, source }),
            }
        }
        Err(StoreError::Locked { path: root.to_path_buf(), pid: "unknown".into() })
    }
}

impl Drop for LockFile {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
