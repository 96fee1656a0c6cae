use alloc::string::String;

use crate::network::GroupId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A state variable became NaN or infinite.
    #[error("non-finite state in {group} neuron {neuron} at t = {time_ms} ms")]
    NonFinite {
        group: GroupId,
        neuron: usize,
        time_ms: f64,
    },
    #[error("invalid configuration at `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("neuron index {index} out of range for group of {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("trace of neuron {neuron} read at {t} ms, before its last update at {last_update} ms")]
    TraceOrdering {
        neuron: usize,
        t: f64,
        last_update: f64,
    },
    #[error("input {index}: rate {rate_hz} Hz is too high for dt = {dt_ms} ms")]
    PoissonRate {
        index: usize,
        rate_hz: f64,
        dt_ms: f64,
    },
}

impl Error {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Numeric divergence, as opposed to a configuration problem.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}
