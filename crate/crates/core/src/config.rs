//! Experiment description with canonical defaults.

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::coding::RelationKind;
use crate::error::{Error, Result};
use crate::neuron::{NeuronTypeOverrides, NeuronTypeParams, SynapseParams};
use crate::plasticity::{InhibParams, TripletParams};

pub const CANONICAL_N_E: usize = 1600;
pub const CANONICAL_N_I: usize = 400;

/// Sizes of one neuron population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub n_e: usize,
    pub n_i: usize,
}

impl PopulationSpec {
    pub const CANONICAL: Self = Self {
        n_e: CANONICAL_N_E,
        n_i: CANONICAL_N_I,
    };
}

/// Parameters of both neuron types. In human-readable documents, missing
/// fields take the canonical value of their type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeuronConfig {
    pub excitatory: NeuronTypeParams,
    pub inhibitory: NeuronTypeParams,
}

impl<'de> Deserialize<'de> for NeuronConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            #[serde(default)]
            excitatory: NeuronTypeOverrides,
            #[serde(default)]
            inhibitory: NeuronTypeOverrides,
        }
        #[derive(Deserialize)]
        struct Full {
            excitatory: NeuronTypeParams,
            inhibitory: NeuronTypeParams,
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
            excitatory: raw.excitatory.apply(NeuronTypeParams::EXCITATORY),
            inhibitory: raw.inhibitory.apply(NeuronTypeParams::INHIBITORY),
        })
    }
}

impl Default for NeuronConfig {
    fn default() -> Self {
        Self {
            excitatory: NeuronTypeParams::EXCITATORY,
            inhibitory: NeuronTypeParams::INHIBITORY,
        }
    }
}

/// Wiring and non-plastic weights.
///
/// Static weights are given for the canonical fan-in (`p` times the
/// canonical source size) and rescaled by canonical / actual expected fan-in
/// when a projection is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectivityConfig {
    pub p: f64,
    /// Use `min(1, p / scale)` for scaled-down networks so that fan-in stays
    /// at its canonical value.
    pub compensate_scale: bool,
    /// Recurrent plastic E->E weights start uniform on
    /// `[0, ee_init_fraction * w_max]`.
    pub ee_init_fraction: f64,
    /// Same for input axon -> E weights.
    pub input_init_fraction: f64,
    /// Same for long-range E->E weights.
    pub long_range_init_fraction: f64,
    /// Recurrent E->I weight.
    pub w_ei: f64,
    /// Recurrent I->I weight.
    pub w_ii: f64,
    /// Input axon -> I weight.
    pub w_input_ei: f64,
    /// Long-range E->I weight.
    pub w_long_range_ei: f64,
    /// Plastic I->E weights start uniform on `[0, 2 * ie_init_mean]`.
    pub ie_init_mean: f64,
}

impl Default for ConnectivityConfig {
    fn default() -> Self {
        Self {
            p: 0.1,
            compensate_scale: true,
            ee_init_fraction: 0.3,
            input_init_fraction: 0.3,
            long_range_init_fraction: 0.3,
            w_ei: 0.05,
            w_ii: 0.05,
            w_input_ei: 0.05,
            w_long_range_ei: 0.05,
            ie_init_mean: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodingConfig {
    /// Tuning width of the input Gaussian, fraction of the circle.
    pub sigma: f64,
    /// Peak input rate during training, Hz.
    pub peak_rate: f64,
}

impl Default for CodingConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0 / 16.0,
            peak_rate: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Integration step, ms.
    pub dt: f64,
    /// Presentation time of one training example, ms.
    pub t_example: f64,
    /// Presentation time of one test example, ms.
    pub t_test: f64,
    /// Leading part of each test presentation excluded from decoding, ms.
    pub t_test_settle: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Excitatory weight normalization every this many training examples.
    pub normalize_every: usize,
    pub relation: RelationKind,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            t_example: 250.0,
            t_test: 1000.0,
            t_test_settle: 0.0,
            n_train: 30_000,
            n_test: 1000,
            normalize_every: 1,
            relation: RelationKind::Additive,
        }
    }
}

/// Complete description of one run. Unspecified fields take the canonical
/// values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub seed: u64,
    /// Fraction of the canonical population sizes.
    pub scale: f64,
    pub neuron: NeuronConfig,
    pub synapse: SynapseParams,
    pub connectivity: ConnectivityConfig,
    pub triplet: TripletParams,
    pub inhibitory_plasticity: InhibParams,
    pub coding: CodingConfig,
    pub schedule: ScheduleConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scale: 1.0,
            neuron: NeuronConfig::default(),
            synapse: SynapseParams::default(),
            connectivity: ConnectivityConfig::default(),
            triplet: TripletParams::default(),
            inhibitory_plasticity: InhibParams::default(),
            coding: CodingConfig::default(),
            schedule: ScheduleConfig::default(),
        }
    }
}

fn positive(key: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive, got {x}")))
    }
}

fn non_negative(key: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be non-negative, got {x}")))
    }
}

fn scaled_count(key: &str, scale: f64, canonical: usize) -> Result<usize> {
    let n = scale * canonical as f64;
    let rounded = crate::math::round(n);
    if rounded < 1.0 || (n - rounded).abs() > 1e-9 {
        return Err(Error::config(
            key,
            format!("scale {scale} gives a non-integer or empty population ({n})"),
        ));
    }
    Ok(rounded as usize)
}

impl NetworkConfig {
    /// A canonical configuration at the given scale.
    pub fn scaled(scale: f64) -> Self {
        Self {
            scale,
            ..Self::default()
        }
    }

    pub fn population(&self) -> Result<PopulationSpec> {
        Ok(PopulationSpec {
            n_e: scaled_count("scale", self.scale, CANONICAL_N_E)?,
            n_i: scaled_count("scale", self.scale, CANONICAL_N_I)?,
        })
    }

    /// Number of axons per input group.
    pub fn n_input(&self) -> Result<usize> {
        scaled_count("scale", self.scale, CANONICAL_N_E)
    }

    /// Connection probability actually used for drawing projections.
    pub fn effective_p(&self) -> f64 {
        let p = self.connectivity.p;
        if self.connectivity.compensate_scale && self.scale < 1.0 {
            (p / self.scale).min(1.0)
        } else {
            p
        }
    }

    /// Steps per `duration` ms.
    pub fn steps(&self, duration: f64) -> u64 {
        crate::math::round(duration / self.schedule.dt) as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::config("scale", "must lie in (0, 1]"));
        }
        self.population()?;
        self.neuron.excitatory.validate("neuron.excitatory")?;
        self.neuron.inhibitory.validate("neuron.inhibitory")?;
        self.synapse.excitatory.validate("synapse.excitatory")?;
        self.synapse.inhibitory.validate("synapse.inhibitory")?;
        self.triplet.validate("triplet")?;
        self.inhibitory_plasticity.validate("inhibitory_plasticity")?;

        let c = &self.connectivity;
        if !(c.p > 0.0 && c.p <= 1.0) {
            return Err(Error::config("connectivity.p", "must lie in (0, 1]"));
        }
        for (key, f) in [
            ("connectivity.ee_init_fraction", c.ee_init_fraction),
            ("connectivity.input_init_fraction", c.input_init_fraction),
            ("connectivity.long_range_init_fraction", c.long_range_init_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config(key, "must lie in [0, 1]"));
            }
        }
        non_negative("connectivity.w_ei", c.w_ei)?;
        non_negative("connectivity.w_ii", c.w_ii)?;
        non_negative("connectivity.w_input_ei", c.w_input_ei)?;
        non_negative("connectivity.w_long_range_ei", c.w_long_range_ei)?;
        non_negative("connectivity.ie_init_mean", c.ie_init_mean)?;

        if !(self.coding.sigma > 0.0 && self.coding.sigma < 0.5) {
            return Err(Error::config("coding.sigma", "must lie in (0, 0.5)"));
        }
        non_negative("coding.peak_rate", self.coding.peak_rate)?;

        let s = &self.schedule;
        positive("schedule.dt", s.dt)?;
        positive("schedule.t_example", s.t_example)?;
        positive("schedule.t_test", s.t_test)?;
        non_negative("schedule.t_test_settle", s.t_test_settle)?;
        if s.t_test_settle >= s.t_test {
            return Err(Error::config(
                "schedule.t_test_settle",
                "must be shorter than schedule.t_test",
            ));
        }
        if s.normalize_every == 0 {
            return Err(Error::config("schedule.normalize_every", "must be at least 1"));
        }
        if self.coding.peak_rate * s.dt * 1e-3 >= crate::coding::MAX_SPIKE_PROBABILITY {
            return Err(Error::config(
                "schedule.dt",
                "too large for the peak input rate",
            ));
        }
        Ok(())
    }

    /// Short human-readable summary.
    pub fn describe(&self) -> String {
        format!(
            "scale {} ({:?}), seed {}, {} x {} ms training, relation {}",
            self.scale,
            self.population().ok(),
            self.seed,
            self.schedule.n_train,
            self.schedule.t_example,
            self.schedule.relation.as_str()
        )
    }
}
