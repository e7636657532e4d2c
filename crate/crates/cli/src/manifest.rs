//! Stage provenance manifests.
//!
//! Every stage writes a `manifest.json` next to its outputs recording the
//! tool version, a hash of the effective configuration, and content hashes
//! of the files it read and wrote. Downstream stages re-verify their inputs
//! against these records before consuming them, so a tampered or stale
//! artifact fails loudly instead of producing silently wrong results.
//!
//! Per-epoch training logs carry wall-clock timings and are deliberately
//! not part of any manifest; everything a manifest covers is reproducible
//! byte for byte from the seeds.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

/// FNV-1a 64-bit content hash; provenance, not cryptography.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Path relative to the output root.
    pub path: String,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub tool_version: String,
    pub config_hash: String,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

pub fn hash_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

fn relative_to(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .into_owned()
}

impl StageManifest {
    pub fn new(stage: &str, config_toml: &str) -> Self {
        Self {
            stage: stage.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: format!("{:016x}", fnv1a64(config_toml.as_bytes())),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn record_input(&mut self, root: &Path, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(FileRecord {
            path: relative_to(root, path),
            hash: hash_file(path)?,
        });
        Ok(())
    }

    pub fn record_output(&mut self, root: &Path, path: &Path) -> anyhow::Result<()> {
        self.outputs.push(FileRecord {
            path: relative_to(root, path),
            hash: hash_file(path)?,
        });
        Ok(())
    }

    /// Write `manifest.json` into the stage directory.
    pub fn write(&self, stage_dir: &Path) -> anyhow::Result<PathBuf> {
        let path = stage_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(stage_dir: &Path) -> anyhow::Result<Self> {
        let path = stage_dir.join("manifest.json");
        let text = fs::read_to_string(&path).with_context(|| {
            format!(
                "missing manifest {} — run the upstream stage first",
                path.display()
            )
        })?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Recompute every recorded output hash and fail on any mismatch.
    pub fn verify_outputs(&self, root: &Path) -> anyhow::Result<()> {
        for record in &self.outputs {
            let path = root.join(&record.path);
            let actual = hash_file(&path)
                .with_context(|| format!("stage {} output missing", self.stage))?;
            anyhow::ensure!(
                actual == record.hash,
                "provenance failure: {} was modified after stage {} wrote it \
                 (recorded {}, found {actual})",
                record.path,
                self.stage,
                record.hash
            );
        }
        Ok(())
    }
}

/// Verify an upstream stage's manifest before consuming its artifacts.
pub fn require_stage(root: &Path, stage_dir: &Path, stage: &str) -> anyhow::Result<StageManifest> {
    let manifest = StageManifest::read(stage_dir)
        .with_context(|| format!("stage `{stage}` has not produced outputs yet"))?;
    manifest
        .verify_outputs(root)
        .with_context(|| format!("verifying stage `{stage}`"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        // standard FNV-1a test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn tamper_detection() {
        let dir = std::env::temp_dir().join(format!("blk-manifest-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let artifact = dir.join("artifact.bin");
        fs::write(&artifact, b"payload").unwrap();

        let mut m = StageManifest::new("demo", "config");
        m.record_output(&dir, &artifact).unwrap();
        m.write(&dir).unwrap();

        let back = StageManifest::read(&dir).unwrap();
        back.verify_outputs(&dir).unwrap();

        fs::write(&artifact, b"tampered").unwrap();
        assert!(back.verify_outputs(&dir).is_err());

        fs::remove_dir_all(&dir).ok();
    }
}
