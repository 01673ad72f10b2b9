//! Run manifests: a record of exactly what a command did, sufficient to
//! reproduce its artifact bitwise (same inputs, same resolved config, same
//! seed). Written atomically as `<artifact>.manifest.json` next to each
//! produced artifact; commands without a file artifact emit the manifest to
//! standard error instead.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliResult;

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    /// The resolved configuration with every default materialized.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<String>,
    pub duration_seconds: f64,
}

pub struct ManifestBuilder {
    command: String,
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    artifacts: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64, config: impl Serialize) -> ManifestBuilder {
        ManifestBuilder {
            command: command.to_string(),
            seed,
            config: serde_json::to_value(config).expect("config serialization"),
            inputs: Vec::new(),
            artifacts: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Record an input file with its content digest.
    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let bytes = fs::read(path).map_err(|e| crate::io_err(path, e))?;
        let digest = Sha256::digest(&bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    fn build(&self) -> RunManifest {
        RunManifest {
            command: self.command.clone(),
            seed: self.seed,
            config: self.config.clone(),
            inputs: self.inputs.clone(),
            artifacts: self
                .artifacts
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            duration_seconds: self.started.elapsed().as_secs_f64(),
        }
    }

    /// Write the manifest next to the first artifact, atomically; with no
    /// artifact, print it to standard error.
    pub fn finish(self) -> CliResult<()> {
        let manifest = self.build();
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
        match self.artifacts.first() {
            Some(artifact) => {
                let path = manifest_path(artifact);
                let tmp = path.with_extension("json.tmp");
                fs::write(&tmp, json.as_bytes()).map_err(|e| crate::io_err(&tmp, e))?;
                fs::rename(&tmp, &path).map_err(|e| crate::io_err(&path, e))?;
            }
            None => eprintln!("{json}"),
        }
        Ok(())
    }
}

/// Manifest location for a given artifact.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}
