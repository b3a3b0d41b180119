use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;
use malab::config::ExperimentConfig;

#[derive(Debug, Serialize)]
struct ManifestEntry {
    bytes: usize,
    sha256: String,
}

/// Output directory that records a hash for every file it writes.
pub struct OutputDir {
    root: PathBuf,
    files: BTreeMap<String, ManifestEntry>,
}

impl OutputDir {
    /// Creates the directory and writes the resolved config.
    pub fn create(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let root = PathBuf::from(&cfg.output_dir);
        fs::create_dir_all(&root)?;
        let mut out = OutputDir { root, files: BTreeMap::new() };
        out.write("config.resolved.json", cfg.to_json()?.as_bytes())?;
        Ok(out)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, data: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, data)?;
        self.files.insert(
            rel.to_string(),
            ManifestEntry {
                bytes: data.len(),
                sha256: hex::encode(Sha256::digest(data)),
            },
        );
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(malab::MalabError::from)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(self) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&self.files).map_err(malab::MalabError::from)? + "\n";
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(())
    }
}
