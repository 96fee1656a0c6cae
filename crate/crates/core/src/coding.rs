//! Population coding of circular values.
//!
//! Values live on the circle `[0, 1)`. Input axon `j` of `n` prefers `j / n`.
//! A stimulus drives the axons with a wrapped Gaussian rate profile; a
//! population is read out with the activity-weighted circular mean of the
//! preferred values of its neurons.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::connectivity::SparseProjection;
use crate::error::{Error, Result};
use crate::math::{self, wrap_unit};

/// Largest `rate * dt` for which a per-step Bernoulli draw stands in for a
/// Poisson process.
pub const MAX_SPIKE_PROBABILITY: f64 = 0.1;

/// Circular distance on `[0, 1)`, in `[0, 0.5]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_unit(a - b);
    d.min(1.0 - d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianStimulus {
    pub value: f64,
    /// Hz
    pub peak_rate: f64,
    /// Width as a fraction of the circle.
    pub sigma: f64,
    /// Input indices forced silent.
    pub zero_mask: Vec<usize>,
}

impl GaussianStimulus {
    pub fn new(value: f64, peak_rate: f64, sigma: f64) -> Self {
        Self {
            value,
            peak_rate,
            sigma,
            zero_mask: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.value) {
            return Err(Error::config("stimulus.value", "must lie in [0, 1)"));
        }
        if !(self.peak_rate >= 0.0 && self.peak_rate.is_finite()) {
            return Err(Error::config("stimulus.peak_rate", "must be non-negative"));
        }
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return Err(Error::config("stimulus.sigma", "must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

/// Rate (Hz) of each of `n` inputs under `stim`.
pub fn gaussian_rate_profile(stim: &GaussianStimulus, n: usize) -> Vec<f64> {
    let denom = 2.0 * stim.sigma * stim.sigma;
    let mut rates: Vec<f64> = (0..n)
        .map(|j| {
            let d = circular_distance(j as f64 / n as f64, stim.value);
            stim.peak_rate * math::exp(-d * d / denom)
        })
        .collect();
    for &j in &stim.zero_mask {
        if let Some(r) = rates.get_mut(j) {
            *r = 0.0;
        }
    }
    rates
}

/// Picks `ceil(fraction * n)` distinct indices to silence.
pub fn random_mask<R: Rng + ?Sized>(n: usize, fraction: f64, rng: &mut R) -> Vec<usize> {
    let k = (math::ceil(fraction * n as f64) as usize).min(n);
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// One time step of independent Bernoulli spiking with probability `rate * dt`.
/// `dt` in ms, rates in Hz.
pub fn draw_poisson_spikes<R: Rng + ?Sized>(rates: &[f64], dt: f64, rng: &mut R) -> Result<Vec<u32>> {
    let mut spikes = Vec::new();
    for (j, &r) in rates.iter().enumerate() {
        let p = r * dt * 1e-3;
        if !(p < MAX_SPIKE_PROBABILITY) || p < 0.0 {
            return Err(Error::PoissonRate {
                index: j,
                rate_hz: r,
                dt_ms: dt,
            });
        }
        if p > 0.0 && rng.gen::<f64>() < p {
            spikes.push(j as u32);
        }
    }
    Ok(spikes)
}

/// Number of steps until the next success of a per-step Bernoulli(p) process,
/// counting the current step as 1.
#[inline]
fn geometric_gap<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    // `gen` yields [0, 1); 1 - u lies in (0, 1].
    let u = 1.0 - rng.gen::<f64>();
    let g = math::ceil(math::ln(u) / math::ln_1p(-p));
    if g < 1.0 {
        1
    } else if !(g <= 1e18) {
        u64::MAX / 2
    } else {
        g as u64
    }
}

/// A group of Poisson axons with piecewise-constant rates.
///
/// Spike steps are drawn as geometric gaps, which has the same distribution
/// as an independent Bernoulli draw per axon and step but costs one draw per
/// spike instead of one per axon and step.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PoissonSource {
    rates: Vec<f64>,
    probabilities: Vec<f64>,
    /// Pending `(step, axon)` events.
    #[serde(with = "queue_serde")]
    queue: BinaryHeap<Reverse<(u64, u32)>>,
}

impl PartialEq for PoissonSource {
    fn eq(&self, other: &Self) -> bool {
        self.rates == other.rates
            && self.probabilities == other.probabilities
            && self.pending() == other.pending()
    }
}

/// Stores the queue as a sorted event list so that serialization does not
/// depend on the heap layout.
mod queue_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        queue: &BinaryHeap<Reverse<(u64, u32)>>,
        s: S,
    ) -> core::result::Result<S::Ok, S::Error> {
        let mut v: Vec<(u64, u32)> = queue.iter().map(|r| r.0).collect();
        v.sort_unstable();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> core::result::Result<BinaryHeap<Reverse<(u64, u32)>>, D::Error> {
        let v: Vec<(u64, u32)> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(Reverse).collect())
    }
}

impl PoissonSource {
    pub fn new(n: usize) -> Self {
        Self {
            rates: vec![0.0; n],
            probabilities: vec![0.0; n],
            queue: BinaryHeap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Replaces the rates from step `step` on (inclusive).
    pub fn set_rates<R: Rng + ?Sized>(
        &mut self,
        rates: &[f64],
        dt: f64,
        step: u64,
        rng: &mut R,
    ) -> Result<()> {
        assert_eq!(rates.len(), self.rates.len(), "rate vector length");
        self.queue.clear();
        for (j, &r) in rates.iter().enumerate() {
            let p = r * dt * 1e-3;
            if !(p < MAX_SPIKE_PROBABILITY) || p < 0.0 {
                return Err(Error::PoissonRate {
                    index: j,
                    rate_hz: r,
                    dt_ms: dt,
                });
            }
            self.rates[j] = r;
            self.probabilities[j] = p;
            if p > 0.0 {
                let at = step.saturating_add(geometric_gap(p, rng) - 1);
                self.queue.push(Reverse((at, j as u32)));
            }
        }
        Ok(())
    }

    /// Silences every axon.
    pub fn clear(&mut self) {
        self.queue.clear();
        self.rates.iter_mut().for_each(|r| *r = 0.0);
        self.probabilities.iter_mut().for_each(|p| *p = 0.0);
    }

    /// Appends the axons firing at `step` in ascending order.
    pub fn pop_step<R: Rng + ?Sized>(&mut self, step: u64, rng: &mut R, spikes: &mut Vec<u32>) {
        while let Some(&Reverse((at, j))) = self.queue.peek() {
            if at > step {
                break;
            }
            self.queue.pop();
            spikes.push(j);
            let next = step.saturating_add(geometric_gap(self.probabilities[j as usize], rng));
            self.queue.push(Reverse((next, j)));
        }
    }

    /// Pending events, sorted, for serialization.
    pub fn pending(&self) -> Vec<(u64, u32)> {
        let mut v: Vec<_> = self.queue.iter().map(|r| r.0).collect();
        v.sort_unstable();
        v
    }
}

/// Result of a population-vector readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularEstimate {
    pub value: f64,
    /// Length of the mean resultant, in `[0, 1]`.
    pub resultant: f64,
}

/// Smallest resultant length treated as decodable.
pub const MIN_RESULTANT: f64 = 1e-9;

/// Activity-weighted circular mean of `angles` (circle fractions).
/// Returns `None` when the activity is all zero or the resultant vanishes.
pub fn decode_circular_mean(activity: &[f64], angles: &[f64]) -> Option<CircularEstimate> {
    let mut total = 0.0;
    let mut re = 0.0;
    let mut im = 0.0;
    for (&a, &theta) in activity.iter().zip(angles) {
        if a > 0.0 {
            let (s, c) = math::sin_cos(math::TAU * theta);
            re += a * c;
            im += a * s;
            total += a;
        }
    }
    if total <= 0.0 {
        return None;
    }
    let resultant = math::sqrt(re * re + im * im) / total;
    if !(resultant >= MIN_RESULTANT) {
        return None;
    }
    Some(CircularEstimate {
        value: wrap_unit(math::atan2(im, re) / math::TAU),
        resultant: resultant.min(1.0),
    })
}

/// Preferred value of one neuron, estimated from its input weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PreferredValue {
    Tuned(CircularEstimate),
    Untuned,
}

impl PreferredValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            PreferredValue::Tuned(e) => Some(e.value),
            PreferredValue::Untuned => None,
        }
    }
}

/// A neuron is tuned when its weight resultant exceeds this multiple of
/// `sqrt(sum w^2) / sum w`, the resultant scale of the same weights placed at
/// random angles. The chance exceedance is about `exp(-k^2)`.
pub const TUNING_SIGNIFICANCE: f64 = 3.0;

/// Circular mean of each target neuron's incoming weights from an input group,
/// with source `i` at angle `i / n_src`. Neurons whose weights are not
/// significantly concentrated (see [`TUNING_SIGNIFICANCE`]) are untuned.
pub fn estimate_preferred_values(input: &SparseProjection) -> Vec<PreferredValue> {
    let n_src = input.n_src() as f64;
    (0..input.n_dst())
        .map(|j| {
            let range = input.incoming(j);
            let weights = &input.weights[range.clone()];
            let angles: Vec<f64> = input.pre()[range].iter().map(|&i| i as f64 / n_src).collect();
            let total: f64 = weights.iter().sum();
            let chance = math::sqrt(weights.iter().map(|w| w * w).sum::<f64>()) / total;
            match decode_circular_mean(weights, &angles) {
                Some(e) if e.resultant > TUNING_SIGNIFICANCE * chance => PreferredValue::Tuned(e),
                _ => PreferredValue::Untuned,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationKind {
    /// `x + y - z = 0 (mod 1)`
    Additive,
    /// `x = 0.5 + y = -z (mod 1)`
    AffineNeg,
    /// `x = 2y (mod 1) = z^2`
    DoubleSquare,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Additive => "additive",
            RelationKind::AffineNeg => "affine-neg",
            RelationKind::DoubleSquare => "double-square",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "additive" => RelationKind::Additive,
            "affine-neg" | "affine_neg" => RelationKind::AffineNeg,
            "double-square" | "double_square" => RelationKind::DoubleSquare,
            _ => return None,
        })
    }

    /// The unique triple with the given free value: `x` and `y` for
    /// additive, `x` for affine-neg, `y` for double-square.
    pub fn complete(self, first: f64, second: f64) -> RelationSample {
        let (x, y, z) = match self {
            RelationKind::Additive => (first, second, wrap_unit(first + second)),
            RelationKind::AffineNeg => (first, wrap_unit(first - 0.5), wrap_unit(-first)),
            RelationKind::DoubleSquare => {
                let x = wrap_unit(2.0 * first);
                (x, first, math::sqrt(x))
            }
        };
        RelationSample { x, y, z, kind: self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationSample {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub kind: RelationKind,
}

impl RelationSample {
    pub fn values(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Largest violation of the defining identity.
    pub fn residual(&self) -> f64 {
        match self.kind {
            RelationKind::Additive => circular_distance(self.x + self.y, self.z),
            RelationKind::AffineNeg => circular_distance(self.y, self.x - 0.5)
                .max(circular_distance(self.z, -self.x)),
            RelationKind::DoubleSquare => {
                circular_distance(self.x, 2.0 * self.y).max((self.x - self.z * self.z).abs())
            }
        }
    }
}

pub fn sample_relation<R: Rng + ?Sized>(kind: RelationKind, rng: &mut R) -> RelationSample {
    let first = rng.gen::<f64>();
    let second = match kind {
        RelationKind::Additive => rng.gen::<f64>(),
        _ => 0.0,
    };
    kind.complete(first, second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn circular_distance_examples() {
        assert!((circular_distance(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert_eq!(circular_distance(0.3, 0.3), 0.0);
        assert_eq!(circular_distance(0.25, 0.75), 0.5);
    }

    #[test]
    fn profile_peak_and_wrap() {
        let stim = GaussianStimulus::new(0.5, 20.0, 1.0 / 16.0);
        let r = gaussian_rate_profile(&stim, 1600);
        assert_eq!(r[800], 20.0);
        let stim = GaussianStimulus::new(0.0, 20.0, 1.0 / 16.0);
        let r = gaussian_rate_profile(&stim, 1600);
        assert!((r[1] - r[1599]).abs() < 1e-12);
    }

    #[test]
    fn mask_silences_exact_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut stim = GaussianStimulus::new(0.5, 20.0, 1.0 / 16.0);
        stim.zero_mask = random_mask(1600, 0.32, &mut rng);
        let r = gaussian_rate_profile(&stim, 1600);
        assert_eq!(r.iter().filter(|&&x| x == 0.0).count(), 512);
    }

    #[test]
    fn bernoulli_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(draw_poisson_spikes(&[0.0; 10], 0.1, &mut rng).unwrap().is_empty());
        assert!(matches!(
            draw_poisson_spikes(&[0.0, 2000.0], 0.1, &mut rng),
            Err(Error::PoissonRate { index: 1, .. })
        ));
    }

    #[test]
    fn source_matches_bernoulli_rate() {
        // 200 axons at 20 Hz over 10^4 steps of 0.1 ms: 4000 expected spikes.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut src = PoissonSource::new(200);
        src.set_rates(&[20.0; 200], 0.1, 0, &mut rng).unwrap();
        let mut count = 0usize;
        let mut buf = Vec::new();
        for k in 0..10_000 {
            buf.clear();
            src.pop_step(k, &mut rng, &mut buf);
            assert!(buf.windows(2).all(|w| w[0] < w[1]));
            count += buf.len();
        }
        let n = 2_000_000.0;
        let p = 0.002;
        let var = n * p * (1.0 - p);
        assert!((count as f64 - n * p).abs() < 4.0 * libm::sqrt(var), "{count}");
    }

    #[test]
    fn tiny_rates_stay_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut src = PoissonSource::new(3);
        src.set_rates(&[1e-14, 1e-300, 0.0], 0.1, 0, &mut rng).unwrap();
        let mut buf = Vec::new();
        for k in 0..10_000 {
            src.pop_step(k, &mut rng, &mut buf);
        }
        assert!(buf.is_empty(), "{buf:?}");
    }

    #[test]
    fn decode_examples() {
        let n = 1600;
        let angles: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
        let mut a = vec![0.0; n];
        a[400] = 3.0;
        let e = decode_circular_mean(&a, &angles).unwrap();
        assert!((e.value - 0.25).abs() < 1e-15 && (e.resultant - 1.0).abs() < 1e-12);

        let mut a = vec![0.0; n];
        a[100] = 1.0;
        a[900] = 1.0;
        assert!(decode_circular_mean(&a, &angles).is_none());
        assert!(decode_circular_mean(&[0.0; 4], &angles[..4]).is_none());

        let r = gaussian_rate_profile(&GaussianStimulus::new(0.3, 20.0, 1.0 / 16.0), n);
        let e = decode_circular_mean(&r, &angles).unwrap();
        assert!((e.value - 0.3).abs() < 1e-6);
    }

    #[test]
    fn preferred_values_need_concentrated_weights() {
        use crate::connectivity::{PlasticityRule, ProjectionKind, WeightBounds};
        use crate::network::GroupId;
        let n = 400u32;
        let mut pairs = Vec::new();
        for i in 0..n {
            let d = (i as f64 - 100.0) / 25.0;
            pairs.push((i, 0, 0.1));
            pairs.push((i, 1, 0.01 + math::exp(-d * d / 2.0)));
        }
        let proj = SparseProjection::from_pairs(
            GroupId::Input(0),
            GroupId::Exc(0),
            n as usize,
            2,
            ProjectionKind::EE,
            PlasticityRule::None,
            WeightBounds::new(0.0, 1.0),
            pairs,
        )
        .unwrap();
        let pv = estimate_preferred_values(&proj);
        assert_eq!(pv[0], PreferredValue::Untuned);
        assert!((pv[1].value().unwrap() - 0.25).abs() < 1e-3);
    }

    #[test]
    fn relation_examples() {
        let s = RelationKind::Additive.complete(0.7, 0.6);
        assert!((s.z - 0.3).abs() < 1e-12);
        let s = RelationKind::AffineNeg.complete(0.2, 0.0);
        assert!((s.y - 0.7).abs() < 1e-12 && (s.z - 0.8).abs() < 1e-12);
        let s = RelationKind::DoubleSquare.complete(0.8, 0.0);
        assert!((s.x - 0.6).abs() < 1e-12);
        assert!((s.z - 0.7745966692414834).abs() < 1e-12);
    }
}
