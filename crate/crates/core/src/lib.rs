//! Simulation kernel for spiking relational networks.
//!
//! Populations of conductance-based leaky integrate-and-fire neurons are wired
//! with sparse random projections, trained with reduced triplet STDP on
//! excitatory synapses and a homeostatic rule on inhibitory-to-excitatory
//! synapses, and driven by Gaussian population-coded Poisson inputs.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration
//! documents and the command line live in the `relnet` companion crate.

#![no_std]
#![deny(missing_debug_implementations)]
// `!(x < y)` forms are NaN guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod coding;
pub mod config;
pub mod connectivity;
pub mod error;
pub mod experiment;
mod math;
pub mod metrics;
pub mod network;
pub mod neuron;
pub mod plasticity;
pub mod rng;

pub use config::NetworkConfig;
pub use error::{Error, Result};
pub use network::Network;
