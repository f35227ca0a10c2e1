//! Output directory bookkeeping: every file written is hashed and listed in
//! `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mfabc_core::sampler::EtaTracePoint;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Scale};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub command: String,
    pub config_path: String,
    pub seed: u64,
    pub scale: Scale,
    pub workers: usize,
    /// Named random sub-streams used by this command.
    pub streams: BTreeMap<String, String>,
    pub config: ExperimentConfig,
    pub summary: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_trace: Option<Vec<EtaTracePoint>>,
    pub elapsed_seconds: f64,
    pub files: Vec<FileEntry>,
}

pub fn stream_docs(names: &[&str]) -> BTreeMap<String, String> {
    let doc = |n: &str| {
        match n {
        "campaign" => "campaign/index-<i>: ChaCha8 stream i of the campaign domain; draws theta, low-fidelity noise, continuation uniform, high-fidelity completion in that order. Benchmark rows use the same streams.",
        "observed" => "observed/<c>: synthetic observed data (one stream per simulated cell)",
        "study" => "study/<r>: subsample partition (r = 0) and bootstrap draws of repeat r",
        _ => "",
    }
    };
    names.iter().map(|n| (n.to_string(), doc(n).to_string())).collect()
}

pub struct Output {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: vec![] })
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Render into memory with `f`, then write and hash.
    pub fn write_csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| io(&self.dir.join(name), e))?;
        self.write_bytes(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Run(e.to_string()))?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Write the manifest (not listed in itself).
    pub fn finish(self, mut manifest: Manifest) -> Result<PathBuf, CliError> {
        manifest.files = self.files;
        let path = self.dir.join(MANIFEST);
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Run(e.to_string()))?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        Ok(path)
    }
}
