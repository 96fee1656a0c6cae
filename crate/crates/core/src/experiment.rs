//! Training, inference testing and single-population probe protocols.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coding::{
    circular_distance, decode_circular_mean, estimate_preferred_values, gaussian_rate_profile,
    random_mask, sample_relation, CircularEstimate, GaussianStimulus, PreferredValue,
    RelationSample,
};
use crate::error::{Error, Result};
use crate::metrics::{self, Histogram, Profile};
use crate::network::{GroupId, Network};
use crate::rng::{self, Stream};

/// Examples at the end of training over which rates are reported.
pub const RATE_WINDOW_EXAMPLES: usize = 500;

/// Smoothing window (neurons) for response profiles.
pub const PROFILE_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRates {
    pub name: String,
    /// Hz
    pub mean_e_rate: f64,
    /// Hz
    pub mean_i_rate: f64,
    /// Per-neuron E rates, 1 Hz bins on `[0, 50)`.
    pub e_rate_histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRecord {
    pub example: usize,
    pub variable: String,
    /// Whether this population received its input.
    pub provided: bool,
    pub truth: f64,
    pub decoded: Option<f64>,
    /// Circular distance; 0.5 when undecodable.
    pub error: f64,
    pub resultant: f64,
}

/// Per-example summary passed to training observers.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleInfo<'a> {
    pub index: u64,
    pub values: &'a [f64],
    /// Mean E rate of every population during this example, Hz.
    pub mean_e_rates: &'a [f64],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub populations: Vec<PopulationRates>,
    pub inference: Vec<InferenceRecord>,
    /// `(population, half-width at half max)` in circle fractions.
    pub tuning_widths: Vec<(String, f64)>,
    /// Names of weight snapshots written alongside the run.
    pub snapshots: Vec<String>,
}

impl RunMetrics {
    pub fn errors_for(&self, variable: &str) -> Vec<f64> {
        self.inference
            .iter()
            .filter(|r| r.variable == variable)
            .map(|r| r.error)
            .collect()
    }

    pub fn median_error(&self, variable: &str) -> f64 {
        metrics::median(&self.errors_for(variable))
    }

    pub fn mean_e_rate(&self, population: &str) -> Option<f64> {
        self.populations
            .iter()
            .find(|p| p.name == population)
            .map(|p| p.mean_e_rate)
    }
}

/// Rates of every population from the current spike counts.
pub fn compute_metrics(net: &Network) -> RunMetrics {
    let dt = net.dt();
    let populations = (0..net.populations.len() as u16)
        .map(|p| {
            let e = net.counts.rates(GroupId::Exc(p), dt);
            PopulationRates {
                name: net.populations[p as usize].name.clone(),
                mean_e_rate: metrics::mean(&e),
                mean_i_rate: net.counts.mean_rate(GroupId::Inh(p), dt),
                e_rate_histogram: Histogram::new(&e, 0.0, 50.0, 50),
            }
        })
        .collect();
    RunMetrics {
        populations,
        ..RunMetrics::default()
    }
}

fn e_spike_total(net: &Network, p: u16) -> u64 {
    net.counts.exc[p as usize].iter().map(|&c| c as u64).sum()
}

/// Draws the values of one training example, one per input group.
fn training_values(net: &mut Network) -> Vec<f64> {
    match net.inputs.len() {
        3 => {
            let kind = net.config.schedule.relation;
            sample_relation(kind, &mut net.train_rng).values().to_vec()
        }
        n => (0..n).map(|_| net.train_rng.gen::<f64>()).collect(),
    }
}

/// Presents one Gaussian stimulus per input group with the training peak rate.
pub fn present_values(net: &mut Network, values: &[f64]) -> Result<()> {
    let sigma = net.config.coding.sigma;
    let peak = net.config.coding.peak_rate;
    for (k, &v) in values.iter().enumerate() {
        let n = net.inputs[k].source.len();
        let rates = gaussian_rate_profile(&GaussianStimulus::new(v, peak, sigma), n);
        net.set_input_rates(k as u16, &rates)?;
    }
    Ok(())
}

/// Presents `n_train` examples with plasticity on, normalizing excitatory
/// weights on schedule. Rates in the returned metrics cover the last
/// [`RATE_WINDOW_EXAMPLES`] examples. `observer` runs after every example.
pub fn run_training<F>(net: &mut Network, n_train: usize, mut observer: F) -> Result<RunMetrics>
where
    F: FnMut(&ExampleInfo<'_>, &Network),
{
    let t_example = net.config.schedule.t_example;
    let every = net.config.schedule.normalize_every as u64;
    let steps = net.config.steps(t_example);
    let window_start = n_train.saturating_sub(RATE_WINDOW_EXAMPLES);
    let n_pops = net.populations.len();
    net.plasticity = true;
    net.reset_counts();
    let mut before = vec![0u64; n_pops];
    let mut rates = vec![0.0; n_pops];
    for k in 0..n_train {
        if k == window_start {
            net.reset_counts();
        }
        for (p, b) in before.iter_mut().enumerate() {
            *b = e_spike_total(net, p as u16);
        }
        let values = training_values(net);
        present_values(net, &values)?;
        net.run_steps(steps)?;
        net.examples_trained += 1;
        if net.examples_trained.is_multiple_of(every) {
            net.normalize();
        }
        let seconds = t_example * 1e-3;
        for (p, r) in rates.iter_mut().enumerate() {
            let n = net.populations[p].exc.len() as f64;
            *r = (e_spike_total(net, p as u16) - before[p]) as f64 / (n * seconds);
        }
        observer(
            &ExampleInfo {
                index: net.examples_trained - 1,
                values: &values,
                mean_e_rates: &rates,
            },
            net,
        );
    }
    Ok(compute_metrics(net))
}

/// Preferred value of every E neuron of `pop`, from its input weights; for
/// a population without input (the hidden one) every neuron is untuned.
pub fn preferred_values(net: &Network, pop: u16) -> Vec<PreferredValue> {
    match net.input_projection(pop) {
        Some(proj) => estimate_preferred_values(proj),
        None => vec![PreferredValue::Untuned; net.populations[pop as usize].exc.len()],
    }
}

/// Population-vector readout of `pop` from its current E spike counts.
pub fn decode_population(net: &Network, pop: u16, preferred: &[PreferredValue]) -> Option<CircularEstimate> {
    let counts = &net.counts.exc[pop as usize];
    let (activity, angles): (Vec<f64>, Vec<f64>) = counts
        .iter()
        .zip(preferred)
        .filter_map(|(&c, p)| p.value().map(|v| (c as f64, v)))
        .unzip();
    decode_circular_mean(&activity, &angles)
}

/// Presents one stimulus set with plasticity off: settles for
/// `t_test_settle`, then counts spikes for the rest of `t_test`.
fn present_for_test(net: &mut Network, rates: &[Option<Vec<f64>>], duration: f64, settle: f64) -> Result<()> {
    for (k, r) in rates.iter().enumerate() {
        match r {
            Some(r) => net.set_input_rates(k as u16, r)?,
            None => net.silence_input(k as u16),
        }
    }
    if settle > 0.0 {
        net.run_for(settle)?;
    }
    net.reset_counts();
    net.run_for(duration - settle)
}

/// Inference test on a three-way network: only the populations listed in
/// `provided` (names among A, B, C) receive input; every A, B, C population
/// is decoded and compared with the relation's ground truth. Plasticity and
/// normalization are off throughout, and the plasticity switch is restored
/// afterwards.
pub fn run_inference_test(net: &mut Network, provided: &[&str], n_test: usize) -> Result<RunMetrics> {
    let names = ["A", "B", "C"];
    let pops: Vec<u16> = names
        .iter()
        .map(|n| {
            net.population_index(n)
                .ok_or_else(|| Error::config("provide", alloc::format!("no population {n}")))
        })
        .collect::<Result<_>>()?;
    if provided.is_empty() {
        return Err(Error::config("provide", "at least one population must receive input"));
    }
    for p in provided {
        if !names.contains(p) {
            return Err(Error::config("provide", alloc::format!("unknown population {p}")));
        }
    }
    let inputs: Vec<u16> = pops
        .iter()
        .map(|&p| net.input_of(p).ok_or_else(|| Error::config("provide", "population has no input")))
        .collect::<Result<_>>()?;
    let preferred: Vec<Vec<PreferredValue>> = pops.iter().map(|&p| preferred_values(net, p)).collect();

    let was_plastic = net.plasticity;
    net.plasticity = false;
    let mut rng = rng::stream(net.config.seed, Stream::TestRelations);
    let kind = net.config.schedule.relation;
    let (sigma, peak) = (net.config.coding.sigma, net.config.coding.peak_rate);
    let (t_test, settle) = (net.config.schedule.t_test, net.config.schedule.t_test_settle);
    let mut records = Vec::new();
    let result = (|| -> Result<()> {
        for ex in 0..n_test {
            let sample: RelationSample = sample_relation(kind, &mut rng);
            let values = sample.values();
            let mut rates: Vec<Option<Vec<f64>>> = vec![None; net.inputs.len()];
            for (v, name) in names.iter().enumerate() {
                if provided.contains(name) {
                    let n = net.inputs[inputs[v] as usize].source.len();
                    rates[inputs[v] as usize] =
                        Some(gaussian_rate_profile(&GaussianStimulus::new(values[v], peak, sigma), n));
                }
            }
            present_for_test(net, &rates, t_test, settle)?;
            for (v, name) in names.iter().enumerate() {
                let est = decode_population(net, pops[v], &preferred[v]);
                records.push(InferenceRecord {
                    example: ex,
                    variable: (*name).into(),
                    provided: provided.contains(name),
                    truth: values[v],
                    decoded: est.map(|e| e.value),
                    error: est.map_or(0.5, |e| circular_distance(e.value, values[v])),
                    resultant: est.map_or(0.0, |e| e.resultant),
                });
            }
        }
        Ok(())
    })();
    net.plasticity = was_plastic;
    result?;
    let mut m = compute_metrics(net);
    m.inference = records;
    Ok(m)
}

/// One cue of a probe stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cue {
    pub value: f64,
    /// Hz
    pub peak_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProbeProtocol {
    /// Single cues at evenly spaced values with a random fraction of the
    /// input axons silenced.
    Restoration { trials: usize, mask_fraction: f64, peak_rate: f64 },
    /// Two nearby, non-conflicting cues of different strength.
    CueIntegration { main: Cue, side: Cue },
    /// Two conflicting cues of different strength.
    SoftWta { strong: Cue, weak: Cue },
    /// Two equal cues at `center -/+ s/2` for each separation `s`.
    MultiPeak { center: f64, peak_rate: f64, separations: Vec<f64> },
    /// A single cue swept over peak rates.
    IoCurve { center: f64, peak_rates: Vec<f64> },
}

impl ProbeProtocol {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeProtocol::Restoration { .. } => "restoration",
            ProbeProtocol::CueIntegration { .. } => "cue-integration",
            ProbeProtocol::SoftWta { .. } => "soft-wta",
            ProbeProtocol::MultiPeak { .. } => "multi-peak",
            ProbeProtocol::IoCurve { .. } => "io-curve",
        }
    }
}

/// Presentation settings shared by all probe protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    /// Presentation per condition, ms.
    pub duration: f64,
    /// Leading part excluded from the counts, ms.
    pub settle: f64,
    /// Smoothing window for profiles, neurons.
    pub window: usize,
    /// Relative prominence for peak counting.
    pub peak_prominence: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            duration: 1000.0,
            settle: 100.0,
            window: PROFILE_WINDOW,
            peak_prominence: 0.25,
        }
    }
}

/// One probe condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    /// Protocol parameter of this row: trial value, separation or peak rate.
    pub parameter: f64,
    /// Expected decode, when the protocol defines one.
    pub truth: Option<f64>,
    pub decoded: Option<f64>,
    pub error: Option<f64>,
    pub mean_e_rate: f64,
    pub mean_i_rate: f64,
    pub half_width: Option<f64>,
    pub peaks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub protocol: String,
    /// Set when the population's input weights carry no tuning.
    pub untrained: bool,
    pub rows: Vec<ProbeRow>,
}

/// Response profile of population `pop` ordered by preferred value.
pub fn response_profile(net: &Network, pop: u16, preferred: &[PreferredValue]) -> Profile {
    let rates = net.counts.rates(GroupId::Exc(pop), net.dt());
    Profile::from_pairs(preferred.iter().map(|p| p.value()).zip(rates))
}

/// Below this fraction of tuned neurons a population counts as untrained.
pub const MIN_TUNED_FRACTION: f64 = 0.05;

fn is_untrained(preferred: &[PreferredValue]) -> bool {
    let tuned = preferred.iter().filter(|p| p.value().is_some()).count();
    (tuned as f64) < MIN_TUNED_FRACTION * preferred.len() as f64
}

/// Runs a stimulus protocol on population `pop` (fed by one input group)
/// with plasticity off; the plasticity switch is restored afterwards.
pub fn probe_single_population(
    net: &mut Network,
    pop: u16,
    protocol: &ProbeProtocol,
    settings: &ProbeSettings,
) -> Result<ProbeReport> {
    let input = net
        .input_of(pop)
        .ok_or_else(|| Error::config("probe", "population has no input group"))?;
    let n = net.inputs[input as usize].source.len();
    let sigma = net.config.coding.sigma;
    let preferred = preferred_values(net, pop);
    let untrained = is_untrained(&preferred);
    if untrained {
        log::warn!("probing a population without learned tuning");
    }
    let mut rng = rng::stream(net.config.seed, Stream::Probes);
    let was_plastic = net.plasticity;
    net.plasticity = false;

    let profile_of = |cues: &[Cue], mask: &[usize]| -> Vec<f64> {
        let mut rates = vec![0.0; n];
        for c in cues {
            let mut stim = GaussianStimulus::new(c.value, c.peak_rate, sigma);
            stim.zero_mask = mask.to_vec();
            for (r, x) in rates.iter_mut().zip(gaussian_rate_profile(&stim, n)) {
                *r += x;
            }
        }
        rates
    };

    let mut rows = Vec::new();
    let result = (|| -> Result<()> {
        let mut present = |net: &mut Network, rates: Vec<f64>, parameter: f64, truth: Option<f64>| -> Result<()> {
            let mut all: Vec<Option<Vec<f64>>> = vec![None; net.inputs.len()];
            all[input as usize] = Some(rates);
            present_for_test(net, &all, settings.duration, settings.settle)?;
            let est = decode_population(net, pop, &preferred);
            let profile = response_profile(net, pop, &preferred).smoothed(settings.window);
            rows.push(ProbeRow {
                parameter,
                truth,
                decoded: est.map(|e| e.value),
                error: truth.map(|t| est.map_or(0.5, |e| circular_distance(e.value, t))),
                mean_e_rate: net.counts.mean_rate(GroupId::Exc(pop), net.dt()),
                mean_i_rate: net.counts.mean_rate(GroupId::Inh(pop), net.dt()),
                half_width: profile.half_width(),
                peaks: profile.peaks(settings.peak_prominence).len(),
            });
            Ok(())
        };
        match protocol {
            ProbeProtocol::Restoration {
                trials,
                mask_fraction,
                peak_rate,
            } => {
                for t in 0..*trials {
                    let value = (t as f64 + 0.5) / *trials as f64;
                    let mask = random_mask(n, *mask_fraction, &mut rng);
                    let rates = profile_of(&[Cue { value, peak_rate: *peak_rate }], &mask);
                    present(net, rates, value, Some(value))?;
                }
            }
            ProbeProtocol::CueIntegration { main, side } => {
                present(net, profile_of(&[*main], &[]), 0.0, Some(main.value))?;
                present(net, profile_of(&[*main, *side], &[]), 1.0, None)?;
            }
            ProbeProtocol::SoftWta { strong, weak } => {
                present(net, profile_of(&[*strong], &[]), 0.0, Some(strong.value))?;
                present(net, profile_of(&[*weak], &[]), 1.0, Some(weak.value))?;
                present(net, profile_of(&[*strong, *weak], &[]), 2.0, Some(strong.value))?;
            }
            ProbeProtocol::MultiPeak {
                center,
                peak_rate,
                separations,
            } => {
                for &s in separations {
                    let cues = [
                        Cue {
                            value: crate::math::wrap_unit(center - 0.5 * s),
                            peak_rate: *peak_rate,
                        },
                        Cue {
                            value: crate::math::wrap_unit(center + 0.5 * s),
                            peak_rate: *peak_rate,
                        },
                    ];
                    present(net, profile_of(&cues, &[]), s, None)?;
                }
            }
            ProbeProtocol::IoCurve { center, peak_rates } => {
                for &r in peak_rates {
                    let rates = profile_of(&[Cue { value: *center, peak_rate: r }], &[]);
                    present(net, rates, r, Some(*center))?;
                }
            }
        }
        Ok(())
    })();
    net.plasticity = was_plastic;
    net.silence_input(input);
    result?;
    Ok(ProbeReport {
        protocol: protocol.name().into(),
        untrained,
        rows,
    })
}

/// Smallest separation classified as two peaks such that every larger
/// separation in the sweep is also two-peaked.
pub fn split_separation(rows: &[ProbeRow]) -> Option<f64> {
    let mut split = None;
    for r in rows.iter().rev() {
        if r.peaks >= 2 {
            split = Some(r.parameter);
        } else {
            break;
        }
    }
    split
}
