//! Run manifests: the resolved configuration plus a digest of every artifact
//! in an output directory.

use std::path::Path;

use relnet_core::NetworkConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::snapshot::sha256_hex;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub command: String,
    pub seed: u64,
    /// Resolved configuration, every parameter explicit.
    pub config: NetworkConfig,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn new(command: &str, config: &NetworkConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            rng: relnet_core::rng::ALGORITHM.into(),
            command: command.into(),
            seed: config.seed,
            config: config.clone(),
            artifacts: Vec::new(),
        }
    }
}

/// Regular files of `dir` other than the manifest, sorted by name.
fn artifact_names(dir: &Path) -> CliResult<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let is_file = entry.file_type().map_err(|e| CliError::io(entry.path(), e))?.is_file();
        let name = entry.file_name().to_string_lossy().into_owned();
        if is_file && name != MANIFEST_NAME {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn digest_file(dir: &Path, name: &str) -> CliResult<Artifact> {
    let path = dir.join(name);
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(Artifact {
        name: name.into(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    })
}

/// Lists and digests every file in `dir`, then writes the manifest there.
pub fn write_manifest(dir: &Path, mut manifest: RunManifest) -> CliResult<RunManifest> {
    manifest.artifacts = artifact_names(dir)?
        .iter()
        .map(|n| digest_file(dir, n))
        .collect::<CliResult<_>>()?;
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> CliResult<RunManifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Snapshot {
        path,
        reason: format!("malformed manifest: {e}"),
    })
}

/// Checks that the manifest lists exactly the files present and that every
/// digest matches.
pub fn verify_manifest(dir: &Path) -> CliResult<RunManifest> {
    let manifest = read_manifest(dir)?;
    let fail = |reason: String| CliError::Snapshot {
        path: dir.join(MANIFEST_NAME),
        reason,
    };
    let listed: Vec<&str> = manifest.artifacts.iter().map(|a| a.name.as_str()).collect();
    let present = artifact_names(dir)?;
    if listed != present {
        return Err(fail(format!("lists {listed:?} but the directory holds {present:?}")));
    }
    for a in &manifest.artifacts {
        if digest_file(dir, &a.name)? != *a {
            return Err(fail(format!("digest mismatch for {}", a.name)));
        }
    }
    Ok(manifest)
}
