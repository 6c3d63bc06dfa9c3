//! Run manifests and atomic artifact writing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Every run drops a manifest next to its outputs: the resolved parameters,
/// library version and input hashes. `created_at` is the only field that
/// varies between identical reruns.
#[derive(Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub version: &'static str,
    pub created_at: String,
    pub inputs: BTreeMap<String, String>,
    pub params: serde_json::Value,
    pub outputs: Vec<String>,
}

pub struct OutputDir {
    dir: PathBuf,
    manifest: Manifest,
}

impl OutputDir {
    pub fn create(dir: &Path, subcommand: &str, params: serde_json::Value) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let created_at = {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap_or_default();
            format!("{}", now.as_secs())
        };
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                subcommand: subcommand.to_string(),
                version: env!("CARGO_PKG_VERSION"),
                created_at,
                inputs: BTreeMap::new(),
                params,
                outputs: Vec::new(),
            },
        })
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("cannot read input file {}", path.display()))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        self.manifest.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }


    /// Atomic write: temp file in the same directory, then rename.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let final_path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, bytes)
            .with_context(|| format!("cannot write {}", tmp.display()))?;
        std::fs::rename(&tmp, &final_path)
            .with_context(|| format!("cannot move output into place at {}", final_path.display()))?;
        self.manifest.outputs.push(name.to_string());
        Ok(final_path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn finish(self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        let tmp = self.dir.join(".manifest.json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, self.dir.join("manifest.json"))?;
        Ok(())
    }
}
