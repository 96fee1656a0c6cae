//! Binary network snapshots.
//!
//! Layout: the 8-byte magic `RELNETSN`, a little-endian `u32` format
//! version, the 32-byte SHA-256 digest of the payload, then the payload as
//! bincode. The payload holds the complete network state including random
//! generator positions, so a restored network continues bit-identically.

use std::path::Path;

use relnet_core::Network;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"RELNETSN";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 32;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Digest of every projection's weights and wiring; state and counters
/// are excluded.
pub fn weight_digest(net: &Network) -> String {
    let bytes = bincode::serialize(&net.projections).expect("projections serialize");
    sha256_hex(&bytes)
}

pub fn encode_snapshot(net: &Network) -> Vec<u8> {
    let payload = bincode::serialize(net).expect("network state serializes");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    out
}

pub fn decode_snapshot(bytes: &[u8], path: &Path) -> CliResult<Network> {
    let fail = |reason: String| CliError::Snapshot {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(fail("not a network snapshot".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(fail(format!(
            "snapshot format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let payload = &bytes[HEADER_LEN..];
    if Sha256::digest(payload).as_slice() != &bytes[12..HEADER_LEN] {
        return Err(fail("digest mismatch: snapshot is corrupt".into()));
    }
    let net: Network =
        bincode::deserialize(payload).map_err(|e| fail(format!("malformed payload: {e}")))?;
    net.config.validate()?;
    Ok(net)
}

pub fn write_snapshot(net: &Network, path: &Path) -> CliResult<()> {
    std::fs::write(path, encode_snapshot(net)).map_err(|e| CliError::io(path, e))
}

pub fn read_snapshot(path: &Path) -> CliResult<Network> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_snapshot(&bytes, path)
}
