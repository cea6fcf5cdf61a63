use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::error::CliError;

/// Writes `bytes` to `dir/name` through a temporary file in the same directory.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::io(&target, e))?;
    tmp.persist(&target)
        .map_err(|e| CliError::io(&target, e.error))?;
    Ok(target)
}

/// Replaces directory `dir/name` with one filled by `fill`, via a temporary sibling.
pub fn write_dir_atomic(
    dir: &Path,
    name: &str,
    fill: impl FnOnce(&Path) -> std::io::Result<()>,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let target = dir.join(name);
    let tmp = tempfile::TempDir::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    fill(tmp.path()).map_err(|e| CliError::io(&target, e))?;
    if target.exists() {
        std::fs::remove_dir_all(&target).map_err(|e| CliError::io(&target, e))?;
    }
    let kept = tmp.keep();
    std::fs::rename(&kept, &target).map_err(|e| CliError::io(&target, e))?;
    Ok(target)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Collects what a run needs to be repeated and writes `manifest.json`.
#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub command_line: Vec<String>,
    pub toolkit_version: &'static str,
    pub graph_file: Option<String>,
    pub graph_sha256: Option<String>,
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub tolerances: serde_json::Value,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(skip)]
    start: Option<Instant>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            command_line: std::env::args().collect(),
            toolkit_version: env!("CARGO_PKG_VERSION"),
            graph_file: None,
            graph_sha256: None,
            parameters: serde_json::Value::Null,
            seed,
            threads: rayon::current_num_threads(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_clock_seconds: 0.0,
            tolerances: serde_json::json!({}),
            warnings: Vec::new(),
            outputs: Vec::new(),
            start: Some(Instant::now()),
        }
    }

    pub fn emit(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(dir, name, bytes)?;
        self.outputs.push(name.into());
        Ok(())
    }

    pub fn emit_json(
        &mut self,
        dir: &Path,
        name: &str,
        value: &impl Serialize,
    ) -> Result<(), CliError> {
        let text = serde_json::to_vec_pretty(value).expect("serialisable output");
        self.emit(dir, name, &text)
    }

    pub fn finish(mut self, dir: &Path) -> Result<(), CliError> {
        if let Some(t) = self.start {
            self.wall_clock_seconds = t.elapsed().as_secs_f64();
        }
        let text = serde_json::to_vec_pretty(&self).expect("serialisable manifest");
        write_atomic(dir, "manifest.json", &text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", b"one").unwrap();
        write_atomic(dir.path(), "a.txt", b"two").unwrap();
        assert_eq!(std::fs::read(dir.path().join("a.txt")).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
