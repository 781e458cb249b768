//! Run manifests: every JSON the CLI emits embeds the fully resolved
//! configuration, the seed list, and content digests of the raw input files,
//! so any output can be traced to exact inputs.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputDigest>,
    pub toolkit_version: String,
    pub tokenizer_version: String,
}

pub fn digest_file(path: &Path) -> std::io::Result<InputDigest> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let sha256 = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    Ok(InputDigest { path: path.display().to_string(), sha256 })
}

pub fn manifest(
    command: &str,
    config: serde_json::Value,
    seeds: Vec<u64>,
    input_paths: &[&Path],
) -> std::io::Result<RunManifest> {
    let inputs = input_paths
        .iter()
        .map(|p| digest_file(p))
        .collect::<std::io::Result<Vec<_>>>()?;
    Ok(RunManifest {
        command: command.to_string(),
        config,
        seeds,
        inputs,
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        tokenizer_version: atag_core::corpus::TOKENIZER_VERSION.to_string(),
    })
}
