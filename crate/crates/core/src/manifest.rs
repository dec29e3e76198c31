//! Provenance record written next to every command output.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Full argument vector, program name excluded.
    pub args: Vec<String>,
    /// SHA-256 of the canonical JSON of the effective settings.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<PathBuf>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub stages: Vec<Stage>,
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Hashes a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Collects stage timings while a command runs.
#[derive(Debug)]
pub struct ManifestBuilder {
    manifest: RunManifest,
    stage_start: Option<(String, Instant)>,
}

impl ManifestBuilder {
    pub fn new(command: &str, args: Vec<String>, config: &impl Serialize, seed: Option<u64>) -> Self {
        let config = serde_json::to_value(config).expect("settings serialize");
        let config_hash = sha256_hex(config.to_string().as_bytes());
        ManifestBuilder {
            manifest: RunManifest {
                schema_version: 1,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                args,
                config_hash,
                config,
                seed,
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_unix_ms: unix_ms(),
                finished_unix_ms: 0,
                stages: Vec::new(),
            },
            stage_start: None,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = file_sha256(path)?;
        self.manifest.inputs.push(InputFile {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.to_path_buf());
    }

    /// Ends the running stage, if any, and starts `name`.
    pub fn stage(&mut self, name: &str) {
        self.end_stage();
        self.stage_start = Some((name.to_string(), Instant::now()));
    }

    fn end_stage(&mut self) {
        if let Some((name, start)) = self.stage_start.take() {
            self.manifest.stages.push(Stage {
                name,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }

    pub fn finish(mut self) -> RunManifest {
        self.end_stage();
        self.manifest.finished_unix_ms = unix_ms();
        self.manifest
    }

    /// Finishes and writes the manifest to `path`.
    pub fn write(self, path: &Path) -> Result<RunManifest> {
        let m = self.finish();
        let json = serde_json::to_string_pretty(&m).expect("manifest serializes");
        crate::grid::write_atomic(path, json.as_bytes())?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_stages_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "abc").unwrap();
        let mut b = ManifestBuilder::new("curve", vec!["curve".into()], &serde_json::json!({"k": 3}), Some(7));
        b.input(&input).unwrap();
        b.stage("load");
        b.stage("fit");
        let path = dir.path().join("manifest.json");
        let m = b.write(&path).unwrap();
        assert_eq!(m.stages.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(), ["load", "fit"]);
        assert_eq!(
            m.inputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(m.config_hash, sha256_hex(br#"{"k":3}"#));
        let back: RunManifest = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
