//! Sparse random projections between neuron groups and spike routing.
//!
//! A projection stores its synapses sorted by `(post, pre)`, which makes the
//! incoming synapses of each postsynaptic neuron contiguous. A second index
//! groups synapse ids by presynaptic neuron for spike delivery and for
//! presynaptic plasticity events.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::GroupId;
use crate::neuron::{NeuronType, PopulationState, SynapseKind};

/// Synapse class by source and target neuron type. Input axons are excitatory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectionKind {
    EE,
    EI,
    IE,
    II,
}

impl ProjectionKind {
    pub fn from_types(src: NeuronType, dst: NeuronType) -> Self {
        use NeuronType::*;
        match (src, dst) {
            (Excitatory, Excitatory) => Self::EE,
            (Excitatory, Inhibitory) => Self::EI,
            (Inhibitory, Excitatory) => Self::IE,
            (Inhibitory, Inhibitory) => Self::II,
        }
    }

    pub fn synapse_kind(self) -> SynapseKind {
        match self {
            Self::EE | Self::EI => SynapseKind::Excitatory,
            Self::IE | Self::II => SynapseKind::Inhibitory,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::EE => "EE",
            Self::EI => "EI",
            Self::IE => "IE",
            Self::II => "II",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "EE" => Self::EE,
            "EI" => Self::EI,
            "IE" => Self::IE,
            "II" => Self::II,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlasticityRule {
    None,
    TripletEe,
    InhibIe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightBounds {
    pub min: f64,
    pub max: f64,
}

impl WeightBounds {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    #[inline]
    pub fn clamp(&self, w: f64) -> f64 {
        w.max(self.min).min(self.max)
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && 0.0 <= self.min && self.min <= self.max
    }
}

/// Distribution of initial weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightInit {
    Constant(f64),
    Uniform { low: f64, high: f64 },
}

impl WeightInit {
    pub fn mean(&self) -> f64 {
        match *self {
            WeightInit::Constant(w) => w,
            WeightInit::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightInit::Constant(w) => w,
            WeightInit::Uniform { low, high } => low + (high - low) * rng.gen::<f64>(),
        }
    }
}

/// Row and column sums restored by periodic normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormTargets {
    pub row: f64,
    pub col: f64,
}

/// Everything needed to draw one projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSpec {
    pub src: GroupId,
    pub dst: GroupId,
    pub n_src: usize,
    pub n_dst: usize,
    pub kind: ProjectionKind,
    pub p: f64,
    pub init: WeightInit,
    pub bounds: WeightBounds,
    pub rule: PlasticityRule,
}

/// One directed bundle of synapses between two groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseProjection {
    pub src: GroupId,
    pub dst: GroupId,
    pub kind: ProjectionKind,
    pub rule: PlasticityRule,
    pub bounds: WeightBounds,
    pub norm: Option<NormTargets>,
    n_src: usize,
    n_dst: usize,
    pre: Vec<u32>,
    post: Vec<u32>,
    pub weights: Vec<f64>,
    /// `post_offsets[j]..post_offsets[j + 1]` are the synapses onto `j`.
    post_offsets: Vec<u32>,
    /// `by_pre[pre_offsets[i]..pre_offsets[i + 1]]` are the synapses from `i`.
    pre_offsets: Vec<u32>,
    by_pre: Vec<u32>,
}

impl SparseProjection {
    /// Builds a projection from explicit pairs. Pairs are sorted by
    /// `(post, pre)`; duplicates and out-of-range indices are rejected and
    /// weights are clamped to `bounds`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_pairs(
        src: GroupId,
        dst: GroupId,
        n_src: usize,
        n_dst: usize,
        kind: ProjectionKind,
        rule: PlasticityRule,
        bounds: WeightBounds,
        mut pairs: Vec<(u32, u32, f64)>,
    ) -> Result<Self> {
        if !bounds.is_valid() {
            return Err(Error::config("bounds", "need 0 <= min <= max"));
        }
        pairs.sort_by_key(|p| (p.1, p.0));
        for w in pairs.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::config(
                    "pairs",
                    alloc::format!("duplicate synapse {} -> {}", w[0].0, w[0].1),
                ));
            }
        }
        for &(i, j, _) in &pairs {
            if i as usize >= n_src {
                return Err(Error::IndexOutOfRange {
                    index: i as usize,
                    len: n_src,
                });
            }
            if j as usize >= n_dst {
                return Err(Error::IndexOutOfRange {
                    index: j as usize,
                    len: n_dst,
                });
            }
        }
        let pre = pairs.iter().map(|p| p.0).collect();
        let post = pairs.iter().map(|p| p.1).collect();
        let weights = pairs.iter().map(|p| bounds.clamp(p.2)).collect();
        Ok(Self::indexed(
            src, dst, n_src, n_dst, kind, rule, bounds, pre, post, weights,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn indexed(
        src: GroupId,
        dst: GroupId,
        n_src: usize,
        n_dst: usize,
        kind: ProjectionKind,
        rule: PlasticityRule,
        bounds: WeightBounds,
        pre: Vec<u32>,
        post: Vec<u32>,
        weights: Vec<f64>,
    ) -> Self {
        let mut post_offsets = vec![0u32; n_dst + 1];
        for &j in &post {
            post_offsets[j as usize + 1] += 1;
        }
        for j in 0..n_dst {
            post_offsets[j + 1] += post_offsets[j];
        }
        let mut pre_offsets = vec![0u32; n_src + 1];
        for &i in &pre {
            pre_offsets[i as usize + 1] += 1;
        }
        for i in 0..n_src {
            pre_offsets[i + 1] += pre_offsets[i];
        }
        // Stable fill keeps each presynaptic list in ascending post order.
        let mut cursor: Vec<u32> = pre_offsets[..n_src].to_vec();
        let mut by_pre = vec![0u32; pre.len()];
        for (s, &i) in pre.iter().enumerate() {
            let c = &mut cursor[i as usize];
            by_pre[*c as usize] = s as u32;
            *c += 1;
        }
        Self {
            src,
            dst,
            kind,
            rule,
            bounds,
            norm: None,
            n_src,
            n_dst,
            pre,
            post,
            weights,
            post_offsets,
            pre_offsets,
            by_pre,
        }
    }

    pub fn n_src(&self) -> usize {
        self.n_src
    }

    pub fn n_dst(&self) -> usize {
        self.n_dst
    }

    pub fn len(&self) -> usize {
        self.pre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pre.is_empty()
    }

    pub fn pre(&self) -> &[u32] {
        &self.pre
    }

    pub fn post(&self) -> &[u32] {
        &self.post
    }

    /// `(pre, post, weight)` in `(post, pre)` order.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.pre
            .iter()
            .zip(&self.post)
            .zip(&self.weights)
            .map(|((&i, &j), &w)| (i, j, w))
    }

    /// Synapse id range of the synapses onto `post`.
    #[inline]
    pub fn incoming(&self, post: usize) -> core::ops::Range<usize> {
        self.post_offsets[post] as usize..self.post_offsets[post + 1] as usize
    }

    /// Synapse ids of the synapses leaving `pre`, in ascending post order.
    #[inline]
    pub fn outgoing(&self, pre: usize) -> &[u32] {
        &self.by_pre[self.pre_offsets[pre] as usize..self.pre_offsets[pre + 1] as usize]
    }

    pub fn column_sum(&self, post: usize) -> f64 {
        self.weights[self.incoming(post)].iter().sum()
    }

    pub fn row_sum(&self, pre: usize) -> f64 {
        self.outgoing(pre)
            .iter()
            .map(|&s| self.weights[s as usize])
            .sum()
    }

    pub fn weights_in_bounds(&self) -> bool {
        self.weights
            .iter()
            .all(|&w| self.bounds.min <= w && w <= self.bounds.max)
    }
}

/// Draws a projection where each ordered pair is present independently with
/// probability `p`. With `exclude_autapses`, pairs with `pre == post` are
/// skipped (source and target are the same neurons).
pub fn build_random_projection<R: Rng + ?Sized>(
    spec: &ProjectionSpec,
    exclude_autapses: bool,
    rng: &mut R,
) -> Result<SparseProjection> {
    if !(spec.p > 0.0 && spec.p <= 1.0) {
        return Err(Error::config("connectivity.p", "probability must be in (0, 1]"));
    }
    if !spec.bounds.is_valid() {
        return Err(Error::config("bounds", "need 0 <= min <= max"));
    }
    let expected = (spec.p * (spec.n_src * spec.n_dst) as f64) as usize;
    let mut pre = Vec::with_capacity(expected + expected / 8);
    let mut post = Vec::with_capacity(expected + expected / 8);
    let mut weights = Vec::with_capacity(expected + expected / 8);
    for j in 0..spec.n_dst {
        for i in 0..spec.n_src {
            if exclude_autapses && i == j {
                continue;
            }
            if spec.p >= 1.0 || rng.gen::<f64>() < spec.p {
                pre.push(i as u32);
                post.push(j as u32);
                weights.push(spec.bounds.clamp(spec.init.sample(rng)));
            }
        }
    }
    if pre.is_empty() {
        log::warn!("projection {} -> {} has no synapses", spec.src, spec.dst);
    }
    Ok(SparseProjection::indexed(
        spec.src,
        spec.dst,
        spec.n_src,
        spec.n_dst,
        spec.kind,
        spec.rule,
        spec.bounds,
        pre,
        post,
        weights,
    ))
}

/// Adds each fired synapse's weight to its target conductance. Spikes are
/// processed in the given order and each presynaptic fan-out in ascending
/// post order, which fixes the floating-point summation order.
pub fn deliver_spikes(spikes: &[u32], projection: &SparseProjection, dst: &mut PopulationState) {
    let g = match projection.kind.synapse_kind() {
        SynapseKind::Excitatory => &mut dst.g_e,
        SynapseKind::Inhibitory => &mut dst.g_i,
    };
    for &s in spikes {
        for &id in projection.outgoing(s as usize) {
            let id = id as usize;
            g[projection.post[id] as usize] += projection.weights[id];
        }
    }
}
