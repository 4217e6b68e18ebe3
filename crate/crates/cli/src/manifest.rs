//! Run directories and their manifests.

use std::fs;
use std::path::{Path, PathBuf};

use noisecal::fsio::{sha256_file, write_atomic};
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const TOOL: &str = "noisecal";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a subcommand and check its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: Vec<FileDigest>,
    /// Relative to the run directory.
    pub outputs: Vec<FileDigest>,
}

/// An output directory that remembers what was written into it.
#[derive(Debug)]
pub struct RunDir {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        self.record(name);
        Ok(path)
    }

    /// Notes a file that something else wrote into the directory.
    pub fn record(&mut self, name: &str) {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
    }

    /// Writes `manifest.json` and returns its path.
    pub fn finish(
        self,
        subcommand: &str,
        seed: Option<u64>,
        config: &impl Serialize,
        inputs: &[PathBuf],
    ) -> CliResult<PathBuf> {
        let digest = |p: &Path, shown: String| -> CliResult<FileDigest> {
            Ok(FileDigest {
                path: shown,
                sha256: sha256_file(p)?,
            })
        };
        let manifest = Manifest {
            tool: TOOL,
            version: VERSION,
            subcommand: subcommand.to_string(),
            seed,
            config: serde_json::to_value(config)
                .map_err(|e| CliError::runtime(format!("config does not serialize: {e}")))?,
            inputs: inputs
                .iter()
                .map(|p| digest(p, display(p)))
                .collect::<CliResult<_>>()?,
            outputs: self
                .outputs
                .iter()
                .map(|o| digest(&self.dir.join(o), o.clone()))
                .collect::<CliResult<_>>()?,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(MANIFEST);
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

pub fn display(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_outputs_with_digests() {
        let tmp = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(&tmp.path().join("run")).unwrap();
        run.write("a.txt", b"abc").unwrap();
        run.write("a.txt", b"abc").unwrap();
        let m = run
            .finish("gen", Some(7), &serde_json::json!({"k": 1}), &[])
            .unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(m).unwrap()).unwrap();
        assert_eq!(v["seed"], 7);
        assert_eq!(v["outputs"].as_array().unwrap().len(), 1);
        assert_eq!(
            v["outputs"][0]["sha256"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(v["config"]["k"], 1);
    }
}
