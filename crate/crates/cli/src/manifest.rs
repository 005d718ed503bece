//! Run manifest: enough to reproduce any run byte-for-byte.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::util::write_atomic;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub config_path: Option<PathBuf>,
    /// SHA-256 of the config file bytes when one was given, otherwise of
    /// the canonical JSON of the effective options.
    pub config_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Build and write the manifest. Called before any other output lands in
/// `out_dir`.
pub fn write_manifest(
    subcommand: &str,
    seed: u64,
    out_dir: &Path,
    config_path: Option<&Path>,
    effective_options_json: &str,
) -> Result<RunManifest> {
    let config_sha256 = match config_path {
        Some(path) => sha256_hex(&std::fs::read(path)?),
        None => sha256_hex(effective_options_json.as_bytes()),
    };
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        out_dir: out_dir.to_path_buf(),
        config_path: config_path.map(|p| p.to_path_buf()),
        config_sha256,
    };
    let body = serde_json::to_string_pretty(&manifest)?;
    write_atomic(&out_dir.join("manifest.json"), body.as_bytes())?;
    Ok(manifest)
}
