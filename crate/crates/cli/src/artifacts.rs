//! On-disk artifact handling.  Every file is written atomically (temp
//! file in the target directory, then rename) so an interrupted run never
//! leaves a half-written artifact behind.

use std::fs;
use std::path::{Component, Path, PathBuf};

use orient_core::error::{Error, Result};
use orient_core::model::{sha256_hex, Checkpoint, TrainState};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// A checkpoint plus the hash of the run-config section that produced it.
/// Loading verifies the hash so a model trained under one recipe is never
/// silently reused under another.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredCheckpoint {
    pub role_hash: String,
    pub checkpoint: Checkpoint,
}

pub fn save_checkpoint(path: &Path, state: &TrainState, role_hash: &str) -> Result<()> {
    let stored = StoredCheckpoint {
        role_hash: role_hash.to_string(),
        checkpoint: Checkpoint::from_state(state),
    };
    write_json(path, &stored)
}

pub fn load_checkpoint(path: &Path, role_hash: &str) -> Result<TrainState> {
    let stored: StoredCheckpoint = read_json(path)?;
    if stored.role_hash != role_hash {
        return Err(Error::Mismatch(format!(
            "checkpoint {} was trained under a different configuration",
            path.display()
        )));
    }
    stored.checkpoint.into_state()
}

/// Load without a configuration to check against (orientation of user
/// meshes); the flip-ordering fingerprint is still enforced.
pub fn load_checkpoint_unchecked(path: &Path) -> Result<TrainState> {
    let stored: StoredCheckpoint = read_json(path)?;
    stored.checkpoint.into_state()
}

/// Loss curve rows as `step,loss` CSV.
pub fn loss_csv(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("step,loss\n");
    for (step, loss) in curve {
        out.push_str(&format!("{step},{loss}\n"));
    }
    out
}

/// Reject path-traversal in manifest-relative file names.
pub fn safe_relative(name: &str) -> Result<PathBuf> {
    let path = PathBuf::from(name);
    let plain = path.components().all(|c| matches!(c, Component::Normal(_)));
    if !plain || name.is_empty() {
        return Err(Error::InvalidInput(format!("unsafe relative path \"{name}\"")));
    }
    Ok(path)
}
