//! File formats, configuration documents and command implementations for
//! `relnet-core` networks.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod snapshot;

pub use config::{load_config, parse_config};
pub use error::{CliError, CliResult};
pub use snapshot::{decode_snapshot, encode_snapshot, read_snapshot, write_snapshot};
