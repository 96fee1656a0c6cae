//! Weight-dependent reduced triplet STDP between excitatory neurons, the
//! homeostatic inhibitory rule on inhibitory-to-excitatory synapses, and
//! two-step row/column normalization of excitatory weight matrices.
//!
//! Traces are kept per neuron rather than per synapse. A spike sets a trace
//! to 1 instead of incrementing it, so every synapse sharing that neuron sees
//! the same value and per-neuron storage is exact.
//!
//! Inhibitory weights are stored as non-negative conductance magnitudes. A
//! presynaptic spike changes the magnitude by `+eta_pre * (x_post - 2 alpha tau)`,
//! so an over-active target receives more inhibition.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::connectivity::SparseProjection;
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TripletParams {
    pub eta_pre: f64,
    pub eta_post: f64,
    pub mu: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// ms
    pub tau_x_pre: f64,
    /// ms
    pub tau_x_post1: f64,
    /// ms
    pub tau_x_post2: f64,
}

impl Default for TripletParams {
    fn default() -> Self {
        Self {
            eta_pre: 0.005,
            eta_post: 0.025,
            mu: 0.2,
            w_min: 0.0,
            w_max: 0.5,
            tau_x_pre: 20.0,
            tau_x_post1: 40.0,
            tau_x_post2: 40.0,
        }
    }
}

impl TripletParams {
    pub fn validate(&self, key: &str) -> Result<()> {
        let k = |f: &str| alloc::format!("{key}.{f}");
        for (name, tau) in [
            ("tau_x_pre", self.tau_x_pre),
            ("tau_x_post1", self.tau_x_post1),
            ("tau_x_post2", self.tau_x_post2),
        ] {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::config(&k(name), "time constant must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::config(&k("mu"), "exponent must lie in [0, 1]"));
        }
        if !(self.eta_pre >= 0.0 && self.eta_post >= 0.0) {
            return Err(Error::config(&k("eta_pre"), "learning rates must be non-negative"));
        }
        if !(0.0 <= self.w_min && self.w_min <= self.w_max && self.w_max.is_finite()) {
            return Err(Error::config(&k("w_max"), "need 0 <= w_min <= w_max"));
        }
        Ok(())
    }

    #[inline]
    fn clamp(&self, w: f64) -> f64 {
        w.max(self.w_min).min(self.w_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InhibParams {
    pub eta_pre: f64,
    pub eta_post: f64,
    /// Target postsynaptic rate, Hz.
    pub alpha: f64,
    /// ms
    pub tau_x_pre: f64,
    /// ms
    pub tau_x_post: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl Default for InhibParams {
    fn default() -> Self {
        Self {
            eta_pre: 0.05,
            eta_post: 0.05,
            alpha: 3.0,
            tau_x_pre: 20.0,
            tau_x_post: 20.0,
            w_min: 0.0,
            w_max: 1.0,
        }
    }
}

impl InhibParams {
    pub fn validate(&self, key: &str) -> Result<()> {
        let k = |f: &str| alloc::format!("{key}.{f}");
        if !(self.eta_pre > 0.0 && self.eta_post > 0.0) {
            return Err(Error::config(&k("eta_pre"), "learning rates must be positive"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(&k("alpha"), "target rate must be non-negative"));
        }
        for (name, tau) in [("tau_x_pre", self.tau_x_pre), ("tau_x_post", self.tau_x_post)] {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::config(&k(name), "time constant must be positive"));
            }
        }
        if !(0.0 <= self.w_min && self.w_min <= self.w_max && self.w_max.is_finite()) {
            return Err(Error::config(&k("w_max"), "need 0 <= w_min <= w_max"));
        }
        Ok(())
    }

    /// The presynaptic offset `2 alpha tau_x_post` (alpha in Hz, tau in ms).
    #[inline]
    pub fn offset(&self) -> f64 {
        2.0 * self.alpha * self.tau_x_post * 1e-3
    }

    #[inline]
    fn clamp(&self, w: f64) -> f64 {
        w.max(self.w_min).min(self.w_max)
    }
}

/// Exponentially decaying per-neuron traces, evaluated lazily.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceField {
    pub values: Vec<f64>,
    /// ms
    pub last_update: Vec<f64>,
    /// ms
    pub tau: f64,
}

impl TraceField {
    pub fn new(n: usize, tau: f64) -> Self {
        Self {
            values: vec![0.0; n],
            last_update: vec![0.0; n],
            tau,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trace of `neuron` at time `t`, which must not precede its last update.
    pub fn read(&self, neuron: usize, t: f64) -> Result<f64> {
        let last = self.last_update[neuron];
        if t < last {
            return Err(Error::TraceOrdering {
                neuron,
                t,
                last_update: last,
            });
        }
        Ok(self.value_at(neuron, t))
    }

    /// Unchecked read for the simulation loop, where time only advances.
    #[inline]
    pub(crate) fn value_at(&self, neuron: usize, t: f64) -> f64 {
        let v = self.values[neuron];
        if v == 0.0 {
            0.0
        } else {
            v * math::exp(-(t - self.last_update[neuron]) / self.tau)
        }
    }

    /// Records a spike of `neuron` at `t`.
    #[inline]
    pub fn set(&mut self, neuron: usize, t: f64) {
        self.values[neuron] = 1.0;
        self.last_update[neuron] = t;
    }
}

/// Depression on a presynaptic spike: `dw = -eta_pre * x_post1 * w^mu`.
#[inline]
pub fn triplet_on_pre(w: f64, x_post1: f64, params: &TripletParams) -> f64 {
    let dw = -params.eta_pre * x_post1 * math::pow_weight(w, params.mu);
    params.clamp(w + dw)
}

/// Potentiation on a postsynaptic spike:
/// `dw = eta_post * x_pre * x_post2 * (w_max - w)^mu`, where `x_post2` is the
/// value before this spike resets it.
#[inline]
pub fn triplet_on_post(w: f64, x_pre: f64, x_post2: f64, params: &TripletParams) -> f64 {
    let dw = params.eta_post * x_pre * x_post2 * math::pow_weight(params.w_max - w, params.mu);
    params.clamp(w + dw)
}

/// Inhibitory update on a presynaptic spike.
#[inline]
pub fn inhib_on_pre(w: f64, x_post: f64, params: &InhibParams) -> f64 {
    params.clamp(w + params.eta_pre * (x_post - params.offset()))
}

/// Inhibitory update on a postsynaptic spike.
#[inline]
pub fn inhib_on_post(w: f64, x_pre: f64, params: &InhibParams) -> f64 {
    params.clamp(w + params.eta_post * x_pre)
}

/// Rescales every presynaptic row to `row_target`, then every postsynaptic
/// column to `col_target`. The column step does not re-fix the rows.
/// All-zero rows and columns are left alone; bounds are applied after
/// scaling.
pub fn normalize_rows_then_columns(proj: &mut SparseProjection, row_target: f64, col_target: f64) {
    let n_src = proj.n_src();
    let mut row_sums = vec![0.0f64; n_src];
    for (&i, &w) in proj.pre().iter().zip(&proj.weights) {
        row_sums[i as usize] += w;
    }
    let row_scale: Vec<f64> = row_sums
        .iter()
        .map(|&s| if s > 0.0 { row_target / s } else { 1.0 })
        .collect();
    let pre: Vec<u32> = proj.pre().to_vec();
    for (w, &i) in proj.weights.iter_mut().zip(&pre) {
        *w *= row_scale[i as usize];
    }
    for j in 0..proj.n_dst() {
        let range = proj.incoming(j);
        let sum: f64 = proj.weights[range.clone()].iter().sum();
        if sum > 0.0 {
            let scale = col_target / sum;
            for w in &mut proj.weights[range] {
                *w *= scale;
            }
        }
    }
    let bounds = proj.bounds;
    for w in &mut proj.weights {
        *w = bounds.clamp(*w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::{
        build_random_projection, PlasticityRule, ProjectionKind, ProjectionSpec, WeightBounds,
        WeightInit,
    };
    use crate::network::GroupId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonical_parameters() {
        let t = TripletParams::default();
        assert_eq!(
            (t.eta_pre, t.eta_post, t.mu, t.w_min, t.w_max),
            (0.005, 0.025, 0.2, 0.0, 0.5)
        );
        assert_eq!((t.tau_x_pre, t.tau_x_post1, t.tau_x_post2), (20.0, 40.0, 40.0));
        let i = InhibParams::default();
        assert_eq!((i.alpha, i.tau_x_pre, i.tau_x_post), (3.0, 20.0, 20.0));
        assert_eq!((i.eta_pre, i.eta_post), (0.05, 0.05));
        assert!((i.offset() - 0.12).abs() < 1e-15);
    }

    #[test]
    fn trace_reads() {
        let mut f = TraceField::new(2, 20.0);
        assert_eq!(f.read(0, 100.0).unwrap(), 0.0);
        f.set(1, 10.0);
        assert!((f.read(1, 30.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((f.read(1, 50.0).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert!(matches!(f.read(1, 5.0), Err(Error::TraceOrdering { neuron: 1, .. })));
    }

    #[test]
    fn triplet_pre_examples() {
        let p = TripletParams::default();
        assert_eq!(triplet_on_pre(0.3, 0.0, &p), 0.3);
        assert_eq!(triplet_on_pre(0.0, 0.9, &p), 0.0);
        let dw = triplet_on_pre(0.25, 0.4, &p) - 0.25;
        assert!((dw - -1.5157165665103981e-3).abs() < 1e-15, "{dw}");
    }

    #[test]
    fn triplet_post_examples() {
        let p = TripletParams::default();
        assert_eq!(triplet_on_post(0.5, 1.0, 1.0, &p), 0.5);
        assert_eq!(triplet_on_post(0.2, 0.0, 1.0, &p), 0.2);
        let dw = triplet_on_post(0.2, 0.6, 0.3, &p) - 0.2;
        assert!((dw - 3.5370138851848025e-3).abs() < 1e-15, "{dw}");
    }

    #[test]
    fn inhib_examples() {
        let p = InhibParams::default();
        assert!((inhib_on_pre(0.3, 0.12, &p) - 0.3).abs() < 1e-15);
        assert!((inhib_on_pre(0.3, 0.5, &p) - (0.3 + 0.05 * 0.38)).abs() < 1e-15);
        assert!((inhib_on_pre(0.3, 0.0, &p) - (0.3 - 0.05 * 0.12)).abs() < 1e-15);
        assert_eq!(inhib_on_post(0.1, 0.0, &p), 0.1);
        assert!((inhib_on_post(0.1, 1.0, &p) - 0.15).abs() < 1e-15);
        assert_eq!(inhib_on_post(0.99, 1.0, &p), 1.0);
        assert_eq!(inhib_on_pre(0.001, 0.0, &p), 0.0);
    }

    fn random_matrix(seed: u64, n: usize, p: f64) -> SparseProjection {
        let spec = ProjectionSpec {
            src: GroupId::Exc(0),
            dst: GroupId::Exc(1),
            n_src: n,
            n_dst: n,
            kind: ProjectionKind::EE,
            p,
            init: WeightInit::Uniform {
                low: 0.0,
                high: 0.15,
            },
            bounds: WeightBounds::new(0.0, 0.5),
            rule: PlasticityRule::TripletEe,
        };
        build_random_projection(&spec, false, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn normalization_fixes_columns() {
        let mut m = random_matrix(5, 20, 0.5);
        normalize_rows_then_columns(&mut m, 1.0, 1.0);
        for j in 0..20 {
            let s = m.column_sum(j);
            assert!(s == 0.0 || (s - 1.0).abs() < 1e-9, "{s}");
        }
        assert!(m.weights_in_bounds());
    }

    #[test]
    fn normalization_fixed_point() {
        let mut m = SparseProjection::from_pairs(
            GroupId::Exc(0),
            GroupId::Exc(1),
            2,
            2,
            ProjectionKind::EE,
            PlasticityRule::TripletEe,
            WeightBounds::new(0.0, 0.5),
            alloc::vec![(0, 0, 0.1), (0, 1, 0.2), (1, 0, 0.2), (1, 1, 0.1)],
        )
        .unwrap();
        let before = m.weights.clone();
        normalize_rows_then_columns(&mut m, 0.3, 0.3);
        for (a, b) in before.iter().zip(&m.weights) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rows_and_columns_untouched() {
        let mut m = SparseProjection::from_pairs(
            GroupId::Exc(0),
            GroupId::Exc(1),
            3,
            3,
            ProjectionKind::EE,
            PlasticityRule::TripletEe,
            WeightBounds::new(0.0, 0.5),
            alloc::vec![(0, 0, 0.0), (1, 1, 0.2), (2, 1, 0.1)],
        )
        .unwrap();
        normalize_rows_then_columns(&mut m, 0.3, 0.3);
        assert_eq!(m.weights[0], 0.0);
        assert!((m.column_sum(1) - 0.3).abs() < 1e-12);
    }
}
