//! Summary statistics over rates, decodes and response profiles.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::coding::circular_distance;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Linear-interpolated percentile, `q` in `[0, 100]`. NaN when empty.
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let v = sorted(xs);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = pos - lo as f64;
    v[lo] + (v[hi] - v[lo]) * frac
}

pub fn median(xs: &[f64]) -> f64 {
    percentile(xs, 50.0)
}

/// Fixed-width histogram on `[lo, hi)`; values outside are clamped into the
/// edge bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u32>,
}

impl Histogram {
    pub fn new(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0u32; bins.max(1)];
        let width = (hi - lo) / counts.len() as f64;
        for &x in xs {
            let b = ((x - lo) / width).max(0.0) as usize;
            let b = b.min(counts.len() - 1);
            counts[b] += 1;
        }
        Self { lo, hi, counts }
    }
}

/// Circular moving average with a window of `window` entries.
pub fn smooth_circular(xs: &[f64], window: usize) -> Vec<f64> {
    let n = xs.len();
    if n == 0 || window <= 1 {
        return xs.to_vec();
    }
    let w = window.min(n);
    let back = (w - 1) / 2;
    (0..n)
        .map(|k| {
            let start = k + n - back;
            (0..w).map(|d| xs[(start + d) % n]).sum::<f64>() / w as f64
        })
        .collect()
}

/// Response profile of a population: activities ordered by preferred value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    /// Preferred value of each entry, ascending.
    pub positions: Vec<f64>,
    pub values: Vec<f64>,
}

impl Profile {
    /// Sorts `(position, activity)` pairs by position. Entries without a
    /// position are dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Option<f64>, f64)>) -> Self {
        let mut v: Vec<(f64, f64)> = pairs
            .into_iter()
            .filter_map(|(p, a)| p.map(|p| (p, a)))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            positions: v.iter().map(|x| x.0).collect(),
            values: v.iter().map(|x| x.1).collect(),
        }
    }

    pub fn smoothed(&self, window: usize) -> Self {
        Self {
            positions: self.positions.clone(),
            values: smooth_circular(&self.values, window),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn argmax(&self) -> Option<usize> {
        (0..self.len()).max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
    }

    /// Half-width at half maximum, as a fraction of the circle. The half
    /// level sits halfway between the profile minimum and its peak; the
    /// width is half the circular distance between the two crossings
    /// around the peak. `None` for flat or empty profiles.
    pub fn half_width(&self) -> Option<f64> {
        let n = self.len();
        let peak = self.argmax()?;
        let max = self.values[peak];
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(max > min) {
            return None;
        }
        let level = min + 0.5 * (max - min);
        let crossing = |dir: isize| -> f64 {
            let mut prev = peak;
            for step in 1..n {
                let k = ((peak as isize + dir * step as isize).rem_euclid(n as isize)) as usize;
                if self.values[k] < level {
                    let (va, vb) = (self.values[prev], self.values[k]);
                    let frac = (va - level) / (va - vb);
                    let (pa, pb) = (self.positions[prev], self.positions[k]);
                    let gap = circular_distance(pa, pb);
                    let sign = if dir > 0 { 1.0 } else { -1.0 };
                    return pa + sign * gap * frac;
                }
                prev = k;
            }
            self.positions[peak] + 0.25 * dir as f64
        };
        let right = crossing(1);
        let left = crossing(-1);
        let full = crate::math::wrap_unit(right - left);
        Some(0.5 * full)
    }

    /// Local maxima of the profile whose prominence over the deepest
    /// point between them and the next maximum exceeds `rel_dip` of the
    /// profile range. Returns their positions.
    pub fn peaks(&self, rel_dip: f64) -> Vec<f64> {
        let n = self.len();
        if n < 3 {
            return Vec::new();
        }
        let max = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let range = max - min;
        if !(range > 0.0) {
            return Vec::new();
        }
        let thresh = rel_dip * range;
        // Walk the circle from the global minimum, tracking candidate peaks
        // that rise at least `thresh` above the preceding valley and are
        // followed by a drop of at least `thresh`.
        let start = (0..n)
            .min_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap_or(0);
        let mut out = Vec::new();
        let mut valley = self.values[start];
        let mut candidate: Option<usize> = None;
        for step in 1..=n {
            let k = (start + step) % n;
            let v = self.values[k];
            match candidate {
                None => {
                    if v < valley {
                        valley = v;
                    } else if v - valley >= thresh {
                        candidate = Some(k);
                    }
                }
                Some(c) => {
                    if v > self.values[c] {
                        candidate = Some(k);
                    } else if self.values[c] - v >= thresh {
                        out.push(self.positions[c]);
                        candidate = None;
                        valley = v;
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[0.0, 0.1, 0.5]), 0.1);
        assert_eq!(median(&[0.0, 0.0, 0.0]), 0.0);
        assert!((percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 90.0) - 4.6).abs() < 1e-12);
    }

    #[test]
    fn histogram_counts() {
        let h = Histogram::new(&[0.5, 1.5, 1.7, 20.0, -1.0], 0.0, 10.0, 10);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 2);
        assert_eq!(h.counts[9], 1);
    }

    #[test]
    fn smoothing_preserves_mean() {
        let xs: Vec<f64> = (0..37).map(|k| (k * k % 11) as f64).collect();
        let s = smooth_circular(&xs, 10);
        assert!((mean(&xs) - mean(&s)).abs() < 1e-12);
    }

    fn gaussian_profile(centers: &[f64], sigma: f64, n: usize) -> Profile {
        Profile::from_pairs((0..n).map(|k| {
            let x = k as f64 / n as f64;
            let v: f64 = centers
                .iter()
                .map(|&c| {
                    let d = circular_distance(x, c);
                    libm::exp(-d * d / (2.0 * sigma * sigma))
                })
                .sum();
            (Some(x), v)
        }))
    }

    #[test]
    fn half_width_of_gaussian() {
        let sigma = 0.05;
        let p = gaussian_profile(&[0.3], sigma, 2000);
        let hw = p.half_width().unwrap();
        let expected = sigma * libm::sqrt(2.0 * core::f64::consts::LN_2);
        assert!((hw - expected).abs() < 2e-3, "{hw} vs {expected}");
        let p = gaussian_profile(&[0.99], sigma, 2000);
        assert!((p.half_width().unwrap() - expected).abs() < 2e-3);
    }

    #[test]
    fn peak_counting() {
        let sigma = 0.05;
        assert_eq!(gaussian_profile(&[0.5], sigma, 400).peaks(0.1).len(), 1);
        assert_eq!(gaussian_profile(&[0.45, 0.55], sigma, 400).peaks(0.1).len(), 1);
        assert_eq!(gaussian_profile(&[0.35, 0.65], sigma, 400).peaks(0.1).len(), 2);
    }
}
