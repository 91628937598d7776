use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stvo_esn::ExperimentConfig;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }
}

/// What a run consumed and produced, enough to repeat it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub config: Option<ExperimentConfig>,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileHash>,
    pub artifacts: Vec<FileHash>,
}

impl Manifest {
    pub fn new(command: &str, config: Option<&ExperimentConfig>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            argv: std::env::args().collect(),
            seeds: config.map(|c| c.seeds()).unwrap_or_default(),
            config: config.cloned(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileHash::of(path)?);
        Ok(())
    }

    pub fn add_artifact(&mut self, path: &Path) -> Result<()> {
        self.artifacts.push(FileHash::of(path)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_NAME);
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let art = dir.path().join("a.txt");
        fs::write(&art, "x").unwrap();
        let config = ExperimentConfig::new(stvo_esn::DatasetKind::Mnist, 10, stvo_esn::ActivationKind::Relu);
        let mut m = Manifest::new("train", Some(&config));
        m.add_artifact(&art).unwrap();
        let path = m.write(dir.path()).unwrap();
        let back: Manifest = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.seeds, (0..10).collect::<Vec<_>>());
    }
}
