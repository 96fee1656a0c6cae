//! Conductance-based leaky integrate-and-fire dynamics.
//!
//! Membrane potential follows
//! `tau_mem dV/dt = (v_rest - V) + g_e (v_e - V) + g_i (v_i - V)`, with
//! conductances measured in units of the leak conductance. Each synaptic
//! conductance decays exponentially and jumps by the synaptic weight when a
//! presynaptic spike arrives.
//!
//! The membrane is advanced with forward Euler; conductances are decayed with
//! the exact factor `exp(-dt / tau_g)`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::network::GroupId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeuronType {
    Excitatory,
    Inhibitory,
}

/// Synapse class by the type of the presynaptic neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SynapseKind {
    Excitatory,
    Inhibitory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronTypeParams {
    /// mV
    pub v_rest: f64,
    /// mV
    pub v_reset: f64,
    /// mV
    pub v_thresh: f64,
    /// ms
    pub tau_mem: f64,
    /// ms
    pub tau_refrac: f64,
}

impl NeuronTypeParams {
    pub const EXCITATORY: Self = Self {
        v_rest: -65.0,
        v_reset: -65.0,
        v_thresh: -52.0,
        tau_mem: 20.0,
        tau_refrac: 5.0,
    };

    pub const INHIBITORY: Self = Self {
        v_rest: -60.0,
        v_reset: -45.0,
        v_thresh: -40.0,
        tau_mem: 10.0,
        tau_refrac: 2.0,
    };

    pub fn canonical(kind: NeuronType) -> Self {
        match kind {
            NeuronType::Excitatory => Self::EXCITATORY,
            NeuronType::Inhibitory => Self::INHIBITORY,
        }
    }

    /// Checks the parameter invariants; `key` prefixes the reported key path.
    pub fn validate(&self, key: &str) -> Result<()> {
        let all = [
            self.v_rest,
            self.v_reset,
            self.v_thresh,
            self.tau_mem,
            self.tau_refrac,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::config(key, "all neuron parameters must be finite"));
        }
        if self.v_reset > self.v_thresh {
            return Err(Error::config(
                &alloc::format!("{key}.v_reset"),
                "reset potential must not exceed the threshold",
            ));
        }
        if self.v_rest >= self.v_thresh {
            return Err(Error::config(
                &alloc::format!("{key}.v_rest"),
                "resting potential must lie below the threshold",
            ));
        }
        if self.tau_mem <= 0.0 {
            return Err(Error::config(
                &alloc::format!("{key}.tau_mem"),
                "membrane time constant must be positive",
            ));
        }
        if self.tau_refrac < 0.0 {
            return Err(Error::config(
                &alloc::format!("{key}.tau_refrac"),
                "refractory period must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynapseKindParams {
    /// Conductance decay time constant, ms.
    pub tau_g: f64,
    /// Reversal potential, mV.
    pub v_rev: f64,
}

impl SynapseKindParams {
    pub const EXCITATORY: Self = Self {
        tau_g: 5.0,
        v_rev: 0.0,
    };

    pub const INHIBITORY: Self = Self {
        tau_g: 10.0,
        v_rev: -85.0,
    };

    pub fn validate(&self, key: &str) -> Result<()> {
        if !(self.tau_g > 0.0 && self.tau_g.is_finite()) {
            return Err(Error::config(
                &alloc::format!("{key}.tau_g"),
                "synaptic time constant must be positive",
            ));
        }
        if !self.v_rev.is_finite() {
            return Err(Error::config(
                &alloc::format!("{key}.v_rev"),
                "reversal potential must be finite",
            ));
        }
        Ok(())
    }
}

/// The excitatory and inhibitory synapse parameters seen by every neuron.
/// In human-readable documents, missing fields take the canonical value of
/// their kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynapseParams {
    pub excitatory: SynapseKindParams,
    pub inhibitory: SynapseKindParams,
}

/// Field-wise overrides of [`NeuronTypeParams`].
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct NeuronTypeOverrides {
    v_rest: Option<f64>,
    v_reset: Option<f64>,
    v_thresh: Option<f64>,
    tau_mem: Option<f64>,
    tau_refrac: Option<f64>,
}

impl NeuronTypeOverrides {
    pub(crate) fn apply(self, base: NeuronTypeParams) -> NeuronTypeParams {
        NeuronTypeParams {
            v_rest: self.v_rest.unwrap_or(base.v_rest),
            v_reset: self.v_reset.unwrap_or(base.v_reset),
            v_thresh: self.v_thresh.unwrap_or(base.v_thresh),
            tau_mem: self.tau_mem.unwrap_or(base.tau_mem),
            tau_refrac: self.tau_refrac.unwrap_or(base.tau_refrac),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynapseKindOverrides {
    tau_g: Option<f64>,
    v_rev: Option<f64>,
}

impl SynapseKindOverrides {
    fn apply(self, base: SynapseKindParams) -> SynapseKindParams {
        SynapseKindParams {
            tau_g: self.tau_g.unwrap_or(base.tau_g),
            v_rev: self.v_rev.unwrap_or(base.v_rev),
        }
    }
}

impl<'de> Deserialize<'de> for SynapseParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            #[serde(default)]
            excitatory: SynapseKindOverrides,
            #[serde(default)]
            inhibitory: SynapseKindOverrides,
        }
        #[derive(Deserialize)]
        struct Full {
            excitatory: SynapseKindParams,
            inhibitory: SynapseKindParams,
        }
        if !d.is_human_readable() {
            let f = Full::deserialize(d)?;
            return Ok(Self {
                excitatory: f.excitatory,
                inhibitory: f.inhibitory,
            });
        }
        let raw = Raw::deserialize(d)?;
        Ok(Self {
            excitatory: raw.excitatory.apply(SynapseKindParams::EXCITATORY),
            inhibitory: raw.inhibitory.apply(SynapseKindParams::INHIBITORY),
        })
    }
}

impl Default for SynapseParams {
    fn default() -> Self {
        Self {
            excitatory: SynapseKindParams::EXCITATORY,
            inhibitory: SynapseKindParams::INHIBITORY,
        }
    }
}

/// Fixed point of the membrane equation under clamped conductances.
pub fn steady_state_voltage(
    params: &NeuronTypeParams,
    syn: &SynapseParams,
    g_e: f64,
    g_i: f64,
) -> f64 {
    (params.v_rest + g_e * syn.excitatory.v_rev + g_i * syn.inhibitory.v_rev) / (1.0 + g_e + g_i)
}

/// Per-neuron state of one homogeneous group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub neuron_type: NeuronType,
    /// Membrane potential, mV.
    pub v: Vec<f64>,
    /// Excitatory conductance (units of leak conductance).
    pub g_e: Vec<f64>,
    /// Inhibitory conductance (units of leak conductance).
    pub g_i: Vec<f64>,
    /// Time (ms) until which each neuron is held at reset.
    pub refractory_until: Vec<f64>,
}

impl PopulationState {
    /// `n` neurons at rest with closed synapses.
    pub fn at_rest(n: usize, neuron_type: NeuronType, params: &NeuronTypeParams) -> Self {
        Self {
            neuron_type,
            v: vec![params.v_rest; n],
            g_e: vec![0.0; n],
            g_i: vec![0.0; n],
            refractory_until: vec![f64::NEG_INFINITY; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Opens the synapse of `kind` on `neuron` by `weight`.
    pub fn add_conductance(&mut self, neuron: usize, weight: f64, kind: SynapseKind) -> Result<()> {
        let len = self.len();
        let g = match kind {
            SynapseKind::Excitatory => self.g_e.get_mut(neuron),
            SynapseKind::Inhibitory => self.g_i.get_mut(neuron),
        };
        match g {
            Some(g) => {
                *g += weight;
                Ok(())
            }
            None => Err(Error::IndexOutOfRange { index: neuron, len }),
        }
    }
}

/// Step constants derived from the parameters and `dt`, computed once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    params: NeuronTypeParams,
    e_rev: f64,
    i_rev: f64,
    dt: f64,
    dt_over_tau: f64,
    decay_e: f64,
    decay_i: f64,
}

impl Integrator {
    pub fn new(params: &NeuronTypeParams, syn: &SynapseParams, dt: f64) -> Self {
        Self {
            params: *params,
            e_rev: syn.excitatory.v_rev,
            i_rev: syn.inhibitory.v_rev,
            dt,
            dt_over_tau: dt / params.tau_mem,
            decay_e: math::exp(-dt / syn.excitatory.tau_g),
            decay_i: math::exp(-dt / syn.inhibitory.tau_g),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` from `now` to `now + dt`, appending the indices of
    /// spiking neurons to `spikes` in ascending order.
    ///
    /// A neuron already at threshold when the step starts fires without being
    /// integrated. Spikes are stamped `now`; the neuron is then held at reset
    /// for `tau_refrac`. Conductances used by the Euler step are those at the
    /// start of the step, after which they decay.
    pub fn step(
        &self,
        state: &mut PopulationState,
        now: f64,
        group: GroupId,
        spikes: &mut Vec<u32>,
    ) -> Result<()> {
        let p = &self.params;
        // Refractory comparisons tolerate accumulated rounding in `now`.
        let horizon = now + 0.5 * self.dt;
        let n = state.len();
        let v = &mut state.v[..n];
        let g_e = &mut state.g_e[..n];
        let g_i = &mut state.g_i[..n];
        let refrac = &mut state.refractory_until[..n];
        for k in 0..n {
            let ge = g_e[k];
            let gi = g_i[k];
            if refrac[k] > horizon {
                v[k] = p.v_reset;
            } else {
                let vk = v[k];
                let fired = if vk >= p.v_thresh {
                    true
                } else {
                    let next = vk
                        + self.dt_over_tau
                            * ((p.v_rest - vk) + ge * (self.e_rev - vk) + gi * (self.i_rev - vk));
                    if !next.is_finite() {
                        return Err(Error::NonFinite {
                            group,
                            neuron: k,
                            time_ms: now,
                        });
                    }
                    v[k] = next;
                    next >= p.v_thresh
                };
                if fired {
                    v[k] = p.v_reset;
                    refrac[k] = now + p.tau_refrac;
                    spikes.push(k as u32);
                }
            }
            g_e[k] = ge * self.decay_e;
            g_i[k] = gi * self.decay_i;
        }
        Ok(())
    }
}

/// One integration step; returns the spiking neurons in ascending order.
pub fn step_population(
    state: &mut PopulationState,
    params: &NeuronTypeParams,
    syn: &SynapseParams,
    dt: f64,
    now: f64,
) -> Result<Vec<u32>> {
    let mut spikes = Vec::new();
    Integrator::new(params, syn, dt).step(state, now, GroupId::Exc(0), &mut spikes)?;
    Ok(spikes)
}
