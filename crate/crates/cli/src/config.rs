//! TOML configuration documents.
//!
//! Keys mirror the fields of [`NetworkConfig`]; anything left out takes its
//! canonical default and unknown keys are rejected.

use std::path::Path;

use relnet_core::{Error, NetworkConfig};

use crate::error::{CliError, CliResult};

/// Parses and validates a configuration document.
pub fn parse_config(text: &str, path: &Path) -> CliResult<NetworkConfig> {
    let fail = |key: String, reason: String| CliError::ConfigFile {
        path: path.to_path_buf(),
        key,
        reason,
    };
    let de = toml::Deserializer::new(text);
    let config: NetworkConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        fail(key, inner.message().trim().to_string())
    })?;
    config.validate().map_err(|e| match e {
        Error::Config { key, reason } => fail(key, reason),
        other => CliError::Core(other),
    })?;
    Ok(config)
}

pub fn load_config(path: &Path) -> CliResult<NetworkConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text, path)
}

/// The fully resolved document, every parameter explicit.
pub fn render_config(config: &NetworkConfig) -> String {
    toml::to_string(config).expect("configuration serializes to TOML")
}
