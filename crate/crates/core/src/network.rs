//! Network assembly and the clock-driven simulation loop.
//!
//! One step of length `dt` at time `now = step * dt` runs, in order:
//! 1. Poisson inputs emit their spikes for this step;
//! 2. every neuron group is integrated (see [`Integrator::step`]);
//! 3. all spikes are delivered to their target conductances, which the next
//!    step sees;
//! 4. when plasticity is on, presynaptic updates of every plastic projection
//!    run, presynaptic traces are set, postsynaptic updates run, and finally
//!    postsynaptic traces are set.
//!
//! Within each phase spikes are handled in ascending neuron order and
//! projections in construction order, so a run is a deterministic function
//! of its configuration and seed.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coding::PoissonSource;
use crate::config::{NetworkConfig, PopulationSpec, CANONICAL_N_E, CANONICAL_N_I};
use crate::connectivity::{
    build_random_projection, deliver_spikes, NormTargets, PlasticityRule, ProjectionKind,
    ProjectionSpec, SparseProjection, WeightBounds, WeightInit,
};
use crate::error::{Error, Result};
use crate::neuron::{Integrator, NeuronType, PopulationState};
use crate::plasticity::{
    inhib_on_post, inhib_on_pre, normalize_rows_then_columns, triplet_on_post, triplet_on_pre,
    TraceField,
};
use crate::rng::{self, RngState, Stream};

/// A neuron group: the axons of an input, or the E or I part of a population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupId {
    Input(u16),
    Exc(u16),
    Inh(u16),
}

impl GroupId {
    pub fn neuron_type(self) -> NeuronType {
        match self {
            GroupId::Input(_) | GroupId::Exc(_) => NeuronType::Excitatory,
            GroupId::Inh(_) => NeuronType::Inhibitory,
        }
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupId::Input(i) => write!(f, "in{i}"),
            GroupId::Exc(p) => write!(f, "pop{p}.E"),
            GroupId::Inh(p) => write!(f, "pop{p}.I"),
        }
    }
}

/// Excitatory and inhibitory neurons of one module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub name: String,
    pub exc: PopulationState,
    pub inh: PopulationState,
}

impl Population {
    pub fn spec(&self) -> PopulationSpec {
        PopulationSpec {
            n_e: self.exc.len(),
            n_i: self.inh.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputGroup {
    pub name: String,
    pub source: PoissonSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcTraces {
    /// Presynaptic trace for outgoing triplet synapses.
    pub pre: TraceField,
    pub post1: TraceField,
    pub post2: TraceField,
    /// Postsynaptic trace for incoming inhibitory plastic synapses.
    pub post_ie: TraceField,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Traces {
    pub input_pre: Vec<TraceField>,
    pub exc: Vec<ExcTraces>,
    pub inh_pre: Vec<TraceField>,
}

/// Spike counts per neuron since the last reset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpikeCounts {
    pub steps: u64,
    pub input: Vec<Vec<u32>>,
    pub exc: Vec<Vec<u32>>,
    pub inh: Vec<Vec<u32>>,
}

impl SpikeCounts {
    pub fn group(&self, g: GroupId) -> &[u32] {
        match g {
            GroupId::Input(i) => &self.input[i as usize],
            GroupId::Exc(p) => &self.exc[p as usize],
            GroupId::Inh(p) => &self.inh[p as usize],
        }
    }

    /// Rate (Hz) of every neuron in `g` over the counted window.
    pub fn rates(&self, g: GroupId, dt: f64) -> Vec<f64> {
        let seconds = self.steps as f64 * dt * 1e-3;
        self.group(g)
            .iter()
            .map(|&c| if seconds > 0.0 { c as f64 / seconds } else { 0.0 })
            .collect()
    }

    pub fn mean_rate(&self, g: GroupId, dt: f64) -> f64 {
        let r = self.rates(g, dt);
        if r.is_empty() {
            0.0
        } else {
            r.iter().sum::<f64>() / r.len() as f64
        }
    }

    fn reset(&mut self) {
        self.steps = 0;
        for v in self
            .input
            .iter_mut()
            .chain(self.exc.iter_mut())
            .chain(self.inh.iter_mut())
        {
            v.iter_mut().for_each(|c| *c = 0);
        }
    }
}

/// Opt-in spike recording restricted to some groups and a step window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpikeRecorder {
    pub groups: Vec<GroupId>,
    pub from_step: u64,
    pub to_step: u64,
    /// `(step, group, neuron)`
    pub events: Vec<(u64, GroupId, u32)>,
}

#[derive(Debug, Clone)]
struct Runtime {
    exc: Integrator,
    inh: Integrator,
    spikes: Vec<Vec<u32>>,
    plastic: Vec<usize>,
}

mod rng_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rng: &ChaCha8Rng, s: S) -> core::result::Result<S::Ok, S::Error> {
        RngState::capture(rng).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> core::result::Result<ChaCha8Rng, D::Error> {
        Ok(RngState::deserialize(d)?.restore())
    }
}

/// Neuron groups, projections, plasticity state and the simulation clock.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub config: NetworkConfig,
    pub inputs: Vec<InputGroup>,
    pub populations: Vec<Population>,
    pub projections: Vec<SparseProjection>,
    pub traces: Traces,
    pub counts: SpikeCounts,
    /// Learning and homeostasis switch; off during testing and probing.
    pub plasticity: bool,
    step: u64,
    #[serde(with = "rng_serde")]
    input_rng: ChaCha8Rng,
    /// Draws training values; part of the state so a resumed run continues
    /// the same example sequence.
    #[serde(with = "rng_serde")]
    pub(crate) train_rng: ChaCha8Rng,
    /// Training examples presented so far.
    pub examples_trained: u64,
    #[serde(skip)]
    runtime: Option<Runtime>,
    #[serde(skip)]
    pub recorder: Option<SpikeRecorder>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.inputs == other.inputs
            && self.populations == other.populations
            && self.projections == other.projections
            && self.traces == other.traces
            && self.counts == other.counts
            && self.plasticity == other.plasticity
            && self.step == other.step
            && self.examples_trained == other.examples_trained
            && RngState::capture(&self.input_rng) == RngState::capture(&other.input_rng)
            && RngState::capture(&self.train_rng) == RngState::capture(&other.train_rng)
    }
}

/// Builds the projection specs shared by all assembly helpers.
struct Wiring<'a> {
    config: &'a NetworkConfig,
    p: f64,
}

impl<'a> Wiring<'a> {
    fn new(config: &'a NetworkConfig) -> Self {
        Self {
            config,
            p: config.effective_p(),
        }
    }

    /// Plastic E->E spec with weights uniform on `[0, init_fraction * w_max]`.
    fn plastic_ee(
        &self,
        src: GroupId,
        dst: GroupId,
        n_src: usize,
        n_dst: usize,
        init_fraction: f64,
    ) -> ProjectionSpec {
        let t = &self.config.triplet;
        let high = init_fraction * t.w_max;
        ProjectionSpec {
            src,
            dst,
            n_src,
            n_dst,
            kind: ProjectionKind::EE,
            p: self.p,
            init: WeightInit::Uniform { low: 0.0, high },
            bounds: WeightBounds::new(t.w_min, t.w_max),
            rule: PlasticityRule::TripletEe,
        }
    }

    fn plastic_ie(&self, src: GroupId, dst: GroupId, n_src: usize, n_dst: usize) -> ProjectionSpec {
        let ip = &self.config.inhibitory_plasticity;
        ProjectionSpec {
            src,
            dst,
            n_src,
            n_dst,
            kind: ProjectionKind::IE,
            p: self.p,
            init: WeightInit::Uniform {
                low: 0.0,
                high: 2.0 * self.config.connectivity.ie_init_mean,
            },
            bounds: WeightBounds::new(ip.w_min, ip.w_max),
            rule: PlasticityRule::InhibIe,
        }
    }

    /// Static weight `w_ref` given for the canonical fan-in, rescaled to the
    /// actual expected fan-in.
    fn fixed(
        &self,
        src: GroupId,
        dst: GroupId,
        n_src: usize,
        n_dst: usize,
        w_ref: f64,
    ) -> ProjectionSpec {
        let canonical_src = match src.neuron_type() {
            NeuronType::Excitatory => CANONICAL_N_E,
            NeuronType::Inhibitory => CANONICAL_N_I,
        };
        let canonical_fan_in = self.config.connectivity.p * canonical_src as f64;
        let fan_in = self.p * n_src as f64;
        let w = w_ref * (canonical_fan_in / fan_in);
        ProjectionSpec {
            src,
            dst,
            n_src,
            n_dst,
            kind: ProjectionKind::from_types(src.neuron_type(), dst.neuron_type()),
            p: self.p,
            init: WeightInit::Constant(w),
            bounds: WeightBounds::new(0.0, w),
            rule: PlasticityRule::None,
        }
    }

    fn draw<R: Rng + ?Sized>(
        &self,
        spec: &ProjectionSpec,
        recurrent: bool,
        rng: &mut R,
    ) -> Result<SparseProjection> {
        let mut proj = build_random_projection(spec, recurrent, rng)?;
        if spec.rule == PlasticityRule::TripletEe {
            let mean = spec.init.mean();
            proj.norm = Some(NormTargets {
                row: spec.p * spec.n_dst as f64 * mean,
                col: spec.p * spec.n_src as f64 * mean,
            });
        }
        Ok(proj)
    }
}

/// The four recurrent projections of population `id`: E->E (plastic), E->I,
/// I->E (homeostatic) and I->I.
pub fn assemble_population<R: Rng + ?Sized>(
    name: &str,
    id: u16,
    spec: PopulationSpec,
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<(Population, Vec<SparseProjection>)> {
    let w = Wiring::new(config);
    let (e, i) = (GroupId::Exc(id), GroupId::Inh(id));
    let c = &config.connectivity;
    let projections = vec![
        w.draw(&w.plastic_ee(e, e, spec.n_e, spec.n_e, c.ee_init_fraction), true, rng)?,
        w.draw(&w.fixed(e, i, spec.n_e, spec.n_i, c.w_ei), false, rng)?,
        w.draw(&w.plastic_ie(i, e, spec.n_i, spec.n_e), false, rng)?,
        w.draw(&w.fixed(i, i, spec.n_i, spec.n_i, c.w_ii), true, rng)?,
    ];
    let pop = Population {
        name: name.into(),
        exc: PopulationState::at_rest(spec.n_e, NeuronType::Excitatory, &config.neuron.excitatory),
        inh: PopulationState::at_rest(spec.n_i, NeuronType::Inhibitory, &config.neuron.inhibitory),
    };
    Ok((pop, projections))
}

/// Long-range coupling: E(a)->E(b), E(a)->I(b), E(b)->E(a), E(b)->I(a).
/// The E->E legs are plastic; reciprocity holds between populations, not
/// between individual neurons.
pub fn couple_populations<R: Rng + ?Sized>(
    a: (u16, PopulationSpec),
    b: (u16, PopulationSpec),
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<(Vec<SparseProjection>, Vec<SparseProjection>)> {
    if a.0 == b.0 {
        return Err(Error::config(
            "coupling",
            "a population cannot be coupled to itself",
        ));
    }
    let w = Wiring::new(config);
    let c = &config.connectivity;
    let mut leg = |from: (u16, PopulationSpec), to: (u16, PopulationSpec)| -> Result<Vec<_>> {
        let (fe, te, ti) = (GroupId::Exc(from.0), GroupId::Exc(to.0), GroupId::Inh(to.0));
        Ok(vec![
            w.draw(
                &w.plastic_ee(fe, te, from.1.n_e, to.1.n_e, c.long_range_init_fraction),
                false,
                rng,
            )?,
            w.draw(&w.fixed(fe, ti, from.1.n_e, to.1.n_i, c.w_long_range_ei), false, rng)?,
        ])
    };
    let ab = leg(a, b)?;
    let ba = leg(b, a)?;
    Ok((ab, ba))
}

impl Network {
    /// A network with no groups yet.
    pub fn new(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            inputs: Vec::new(),
            populations: Vec::new(),
            projections: Vec::new(),
            traces: Traces::default(),
            counts: SpikeCounts::default(),
            plasticity: true,
            step: 0,
            input_rng: rng::stream(config.seed, Stream::Inputs),
            train_rng: rng::stream(config.seed, Stream::TrainRelations),
            examples_trained: 0,
            runtime: None,
            recorder: None,
        })
    }

    pub fn add_input(&mut self, name: &str) -> Result<u16> {
        let n = self.config.n_input()?;
        let t = &self.config.triplet;
        self.inputs.push(InputGroup {
            name: name.into(),
            source: PoissonSource::new(n),
        });
        self.traces.input_pre.push(TraceField::new(n, t.tau_x_pre));
        self.counts.input.push(vec![0; n]);
        self.runtime = None;
        Ok((self.inputs.len() - 1) as u16)
    }

    pub fn add_population<R: Rng + ?Sized>(&mut self, name: &str, rng: &mut R) -> Result<u16> {
        let id = self.populations.len() as u16;
        let spec = self.config.population()?;
        let (pop, projections) = assemble_population(name, id, spec, &self.config, rng)?;
        let t = &self.config.triplet;
        let ip = &self.config.inhibitory_plasticity;
        self.traces.exc.push(ExcTraces {
            pre: TraceField::new(spec.n_e, t.tau_x_pre),
            post1: TraceField::new(spec.n_e, t.tau_x_post1),
            post2: TraceField::new(spec.n_e, t.tau_x_post2),
            post_ie: TraceField::new(spec.n_e, ip.tau_x_post),
        });
        self.traces.inh_pre.push(TraceField::new(spec.n_i, ip.tau_x_pre));
        self.counts.exc.push(vec![0; spec.n_e]);
        self.counts.inh.push(vec![0; spec.n_i]);
        self.populations.push(pop);
        self.projections.extend(projections);
        self.runtime = None;
        Ok(id)
    }

    /// Feed-forward input: axons -> E (plastic) and axons -> I (static).
    pub fn connect_input<R: Rng + ?Sized>(&mut self, input: u16, pop: u16, rng: &mut R) -> Result<()> {
        let w = Wiring::new(&self.config);
        let n = self.inputs[input as usize].source.len();
        let spec = self.populations[pop as usize].spec();
        let src = GroupId::Input(input);
        let c = &self.config.connectivity;
        let ee = w.draw(
            &w.plastic_ee(src, GroupId::Exc(pop), n, spec.n_e, c.input_init_fraction),
            false,
            rng,
        )?;
        let ei = w.draw(
            &w.fixed(src, GroupId::Inh(pop), n, spec.n_i, c.w_input_ei),
            false,
            rng,
        )?;
        self.projections.push(ee);
        self.projections.push(ei);
        self.runtime = None;
        Ok(())
    }

    pub fn couple<R: Rng + ?Sized>(&mut self, a: u16, b: u16, rng: &mut R) -> Result<()> {
        let sa = self.populations[a as usize].spec();
        let sb = self.populations[b as usize].spec();
        let (ab, ba) = couple_populations((a, sa), (b, sb), &self.config, rng)?;
        self.projections.extend(ab);
        self.projections.extend(ba);
        self.runtime = None;
        Ok(())
    }

    /// One input group `X` feeding one population `A`.
    pub fn single_population(config: &NetworkConfig) -> Result<Self> {
        let mut net = Self::new(config)?;
        let mut rng = rng::stream(config.seed, Stream::Wiring);
        let x = net.add_input("X")?;
        let a = net.add_population("A", &mut rng)?;
        net.connect_input(x, a, &mut rng)?;
        Ok(net)
    }

    /// Inputs X, Y, Z feeding populations A, B, C, each coupled to a hidden
    /// population H that receives no input.
    pub fn three_way(config: &NetworkConfig) -> Result<Self> {
        let mut net = Self::new(config)?;
        let mut rng = rng::stream(config.seed, Stream::Wiring);
        let inputs = [net.add_input("X")?, net.add_input("Y")?, net.add_input("Z")?];
        let mut pops = [0u16; 3];
        for (slot, name) in pops.iter_mut().zip(["A", "B", "C"]) {
            *slot = net.add_population(name, &mut rng)?;
        }
        let h = net.add_population("H", &mut rng)?;
        for (&x, &p) in inputs.iter().zip(&pops) {
            net.connect_input(x, p, &mut rng)?;
        }
        for &p in &pops {
            net.couple(p, h, &mut rng)?;
        }
        Ok(net)
    }

    pub fn dt(&self) -> f64 {
        self.config.schedule.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Simulated time, ms.
    pub fn now(&self) -> f64 {
        self.step as f64 * self.dt()
    }

    pub fn population_index(&self, name: &str) -> Option<u16> {
        self.populations
            .iter()
            .position(|p| p.name == name)
            .map(|i| i as u16)
    }

    /// The plastic input -> E projection feeding population `pop`, if any.
    pub fn input_projection(&self, pop: u16) -> Option<&SparseProjection> {
        self.projections.iter().find(|p| {
            matches!(p.src, GroupId::Input(_)) && p.dst == GroupId::Exc(pop) && p.kind == ProjectionKind::EE
        })
    }

    /// Index of the input group feeding population `pop`.
    pub fn input_of(&self, pop: u16) -> Option<u16> {
        self.input_projection(pop).and_then(|p| match p.src {
            GroupId::Input(i) => Some(i),
            _ => None,
        })
    }

    pub fn group_state(&self, g: GroupId) -> Option<&PopulationState> {
        match g {
            GroupId::Input(_) => None,
            GroupId::Exc(p) => self.populations.get(p as usize).map(|p| &p.exc),
            GroupId::Inh(p) => self.populations.get(p as usize).map(|p| &p.inh),
        }
    }

    /// Drives input `input` with `rates` (Hz) from the current step on.
    pub fn set_input_rates(&mut self, input: u16, rates: &[f64]) -> Result<()> {
        let dt = self.dt();
        let step = self.step;
        self.inputs[input as usize]
            .source
            .set_rates(rates, dt, step, &mut self.input_rng)
    }

    pub fn silence_input(&mut self, input: u16) {
        self.inputs[input as usize].source.clear();
    }

    pub fn reset_counts(&mut self) {
        self.counts.reset();
    }

    /// Applies row-then-column normalization to every plastic E->E
    /// projection with targets.
    pub fn normalize(&mut self) {
        for proj in &mut self.projections {
            if proj.rule == PlasticityRule::TripletEe {
                if let Some(t) = proj.norm {
                    normalize_rows_then_columns(proj, t.row, t.col);
                }
            }
        }
    }

    fn slot(&self, g: GroupId) -> usize {
        slot_of(self.inputs.len(), g)
    }

    fn build_runtime(&self) -> Runtime {
        let dt = self.dt();
        let n_slots = self.inputs.len() + 2 * self.populations.len();
        Runtime {
            exc: Integrator::new(&self.config.neuron.excitatory, &self.config.synapse, dt),
            inh: Integrator::new(&self.config.neuron.inhibitory, &self.config.synapse, dt),
            spikes: vec![Vec::new(); n_slots],
            plastic: self
                .projections
                .iter()
                .enumerate()
                .filter(|(_, p)| p.rule != PlasticityRule::None)
                .map(|(k, _)| k)
                .collect(),
        }
    }

    /// Spikes emitted by `g` during the last completed step.
    pub fn last_spikes(&self, g: GroupId) -> &[u32] {
        match &self.runtime {
            Some(rt) => &rt.spikes[self.slot(g)],
            None => &[],
        }
    }

    /// Advances `n` steps.
    pub fn run_steps(&mut self, n: u64) -> Result<()> {
        let mut rt = match self.runtime.take() {
            Some(rt) => rt,
            None => self.build_runtime(),
        };
        let result = (0..n).try_for_each(|_| self.step_once(&mut rt));
        self.runtime = Some(rt);
        result
    }

    /// Advances by `duration` ms, rounded to whole steps.
    pub fn run_for(&mut self, duration: f64) -> Result<()> {
        let n = self.config.steps(duration);
        self.run_steps(n)
    }

    fn step_once(&mut self, rt: &mut Runtime) -> Result<()> {
        let now = self.now();
        let n_inputs = self.inputs.len();
        for s in &mut rt.spikes {
            s.clear();
        }

        for (k, input) in self.inputs.iter_mut().enumerate() {
            input
                .source
                .pop_step(self.step, &mut self.input_rng, &mut rt.spikes[k]);
        }
        for (p, pop) in self.populations.iter_mut().enumerate() {
            let e = slot_of(n_inputs, GroupId::Exc(p as u16));
            rt.exc
                .step(&mut pop.exc, now, GroupId::Exc(p as u16), &mut rt.spikes[e])?;
            rt.inh
                .step(&mut pop.inh, now, GroupId::Inh(p as u16), &mut rt.spikes[e + 1])?;
        }

        for proj in &self.projections {
            let spikes = &rt.spikes[slot_of(n_inputs, proj.src)];
            if spikes.is_empty() {
                continue;
            }
            let dst = match proj.dst {
                GroupId::Exc(p) => &mut self.populations[p as usize].exc,
                GroupId::Inh(p) => &mut self.populations[p as usize].inh,
                GroupId::Input(_) => continue,
            };
            deliver_spikes(spikes, proj, dst);
        }

        if self.plasticity {
            self.apply_plasticity(rt, now);
        }

        self.counts.steps += 1;
        for (k, s) in rt.spikes[..n_inputs].iter().enumerate() {
            for &j in s {
                self.counts.input[k][j as usize] += 1;
            }
        }
        for p in 0..self.populations.len() {
            let e = slot_of(n_inputs, GroupId::Exc(p as u16));
            for &j in &rt.spikes[e] {
                self.counts.exc[p][j as usize] += 1;
            }
            for &j in &rt.spikes[e + 1] {
                self.counts.inh[p][j as usize] += 1;
            }
        }
        if let Some(rec) = &mut self.recorder {
            if (rec.from_step..rec.to_step).contains(&self.step) {
                for &g in &rec.groups {
                    for &j in &rt.spikes[slot_of(n_inputs, g)] {
                        rec.events.push((self.step, g, j));
                    }
                }
            }
        }
        self.step += 1;
        Ok(())
    }

    fn apply_plasticity(&mut self, rt: &Runtime, now: f64) {
        let n_inputs = self.inputs.len();
        let triplet = self.config.triplet;
        let inhib = self.config.inhibitory_plasticity;
        let traces = &mut self.traces;

        // Presynaptic updates read postsynaptic traces before any reset.
        for &k in &rt.plastic {
            let proj = &mut self.projections[k];
            let spikes = &rt.spikes[slot_of(n_inputs, proj.src)];
            if spikes.is_empty() {
                continue;
            }
            let GroupId::Exc(dst) = proj.dst else { continue };
            let post_traces = &traces.exc[dst as usize];
            match proj.rule {
                PlasticityRule::TripletEe => {
                    let x1 = &post_traces.post1;
                    for &i in spikes {
                        for s in 0..proj.outgoing(i as usize).len() {
                            let id = proj.outgoing(i as usize)[s] as usize;
                            let j = proj.post()[id] as usize;
                            let x = x1.value_at(j, now);
                            if x > 0.0 {
                                proj.weights[id] = triplet_on_pre(proj.weights[id], x, &triplet);
                            }
                        }
                    }
                }
                PlasticityRule::InhibIe => {
                    let xp = &post_traces.post_ie;
                    for &i in spikes {
                        for s in 0..proj.outgoing(i as usize).len() {
                            let id = proj.outgoing(i as usize)[s] as usize;
                            let j = proj.post()[id] as usize;
                            proj.weights[id] = inhib_on_pre(proj.weights[id], xp.value_at(j, now), &inhib);
                        }
                    }
                }
                PlasticityRule::None => {}
            }
        }

        for (k, s) in rt.spikes[..n_inputs].iter().enumerate() {
            for &j in s {
                traces.input_pre[k].set(j as usize, now);
            }
        }
        for p in 0..self.populations.len() {
            let e = slot_of(n_inputs, GroupId::Exc(p as u16));
            for &j in &rt.spikes[e] {
                traces.exc[p].pre.set(j as usize, now);
            }
            for &j in &rt.spikes[e + 1] {
                traces.inh_pre[p].set(j as usize, now);
            }
        }

        // Postsynaptic updates read presynaptic traces that already include
        // this step's presynaptic spikes.
        for &k in &rt.plastic {
            let proj = &mut self.projections[k];
            let GroupId::Exc(dst) = proj.dst else { continue };
            let spikes = &rt.spikes[slot_of(n_inputs, proj.dst)];
            if spikes.is_empty() {
                continue;
            }
            match (proj.rule, proj.src) {
                (PlasticityRule::TripletEe, src) => {
                    let pre = match src {
                        GroupId::Input(i) => &traces.input_pre[i as usize],
                        GroupId::Exc(p) => &traces.exc[p as usize].pre,
                        GroupId::Inh(_) => continue,
                    };
                    let x2 = &traces.exc[dst as usize].post2;
                    for &j in spikes {
                        let y = x2.value_at(j as usize, now);
                        if y == 0.0 {
                            continue;
                        }
                        for id in proj.incoming(j as usize) {
                            let i = proj.pre()[id] as usize;
                            let x = pre.value_at(i, now);
                            if x > 0.0 {
                                proj.weights[id] = triplet_on_post(proj.weights[id], x, y, &triplet);
                            }
                        }
                    }
                }
                (PlasticityRule::InhibIe, GroupId::Inh(p)) => {
                    let pre = &traces.inh_pre[p as usize];
                    for &j in spikes {
                        for id in proj.incoming(j as usize) {
                            let i = proj.pre()[id] as usize;
                            let x = pre.value_at(i, now);
                            if x > 0.0 {
                                proj.weights[id] = inhib_on_post(proj.weights[id], x, &inhib);
                            }
                        }
                    }
                }
                _ => {}
            }
        }

        for p in 0..self.populations.len() {
            let e = slot_of(n_inputs, GroupId::Exc(p as u16));
            let tr = &mut traces.exc[p];
            for &j in &rt.spikes[e] {
                tr.post1.set(j as usize, now);
                tr.post2.set(j as usize, now);
                tr.post_ie.set(j as usize, now);
            }
        }
    }
}

#[inline]
fn slot_of(n_inputs: usize, g: GroupId) -> usize {
    match g {
        GroupId::Input(i) => i as usize,
        GroupId::Exc(p) => n_inputs + 2 * p as usize,
        GroupId::Inh(p) => n_inputs + 2 * p as usize + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NetworkConfig {
        let mut c = NetworkConfig::scaled(0.0625);
        c.seed = 3;
        c
    }

    #[test]
    fn single_population_structure() {
        let net = Network::single_population(&small()).unwrap();
        assert_eq!(net.populations.len(), 1);
        assert_eq!(net.inputs.len(), 1);
        assert_eq!(net.projections.len(), 6);
        let rules: Vec<_> = net.projections.iter().map(|p| (p.kind, p.rule)).collect();
        assert_eq!(
            &rules[..4],
            &[
                (ProjectionKind::EE, PlasticityRule::TripletEe),
                (ProjectionKind::EI, PlasticityRule::None),
                (ProjectionKind::IE, PlasticityRule::InhibIe),
                (ProjectionKind::II, PlasticityRule::None),
            ]
        );
    }

    #[test]
    fn three_way_structure() {
        let net = Network::three_way(&small()).unwrap();
        assert_eq!(net.populations.len(), 4);
        assert_eq!(net.inputs.len(), 3);
        let recurrent = net
            .projections
            .iter()
            .filter(|p| matches!((p.src, p.dst), (GroupId::Exc(a) | GroupId::Inh(a), GroupId::Exc(b) | GroupId::Inh(b)) if a == b))
            .count();
        let feedforward = net
            .projections
            .iter()
            .filter(|p| matches!(p.src, GroupId::Input(_)))
            .count();
        assert_eq!((recurrent, feedforward, net.projections.len()), (16, 6, 34));
        let h = net.population_index("H").unwrap();
        assert!(net
            .projections
            .iter()
            .filter(|p| p.dst == GroupId::Exc(h) || p.dst == GroupId::Inh(h))
            .all(|p| !matches!(p.src, GroupId::Input(_))));
        assert!(net
            .projections
            .iter()
            .filter(|p| matches!((p.src, p.dst), (GroupId::Exc(a), GroupId::Exc(b) | GroupId::Inh(b)) if a != b))
            .all(|p| p.src.neuron_type() == NeuronType::Excitatory));
    }

    #[test]
    fn self_coupling_is_rejected() {
        let c = small();
        let spec = c.population().unwrap();
        let mut rng = rng::stream(1, Stream::Wiring);
        assert!(couple_populations((0, spec), (0, spec), &c, &mut rng).is_err());
    }

    #[test]
    fn plastic_tags_and_bounds() {
        let net = Network::three_way(&small()).unwrap();
        for p in &net.projections {
            match p.rule {
                PlasticityRule::TripletEe => {
                    assert_eq!(p.kind, ProjectionKind::EE);
                    assert_eq!((p.bounds.min, p.bounds.max), (0.0, 0.5));
                    assert!(p.norm.is_some());
                }
                PlasticityRule::InhibIe => assert_eq!(p.kind, ProjectionKind::IE),
                PlasticityRule::None => {
                    assert!(matches!(p.kind, ProjectionKind::EI | ProjectionKind::II))
                }
            }
            assert!(p.weights_in_bounds());
        }
    }

    #[test]
    fn stepping_is_deterministic() {
        let run = || {
            let c = small();
            let mut net = Network::single_population(&c).unwrap();
            let rates = crate::coding::gaussian_rate_profile(
                &crate::coding::GaussianStimulus::new(0.4, 20.0, c.coding.sigma),
                net.inputs[0].source.len(),
            );
            net.set_input_rates(0, &rates).unwrap();
            net.run_for(100.0).unwrap();
            net
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(a.step_index(), 1000);
        assert!(a.counts.input[0].iter().sum::<u32>() > 0);
    }
}
