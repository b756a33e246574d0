use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ModeMap, ObservableError};
use crate::sde::EnsembleSnapshot;
use crate::stats::{batch_ranges, mean_and_se, NeumaierSum, DEFAULT_BATCHES};

/// Normally ordered moments up to second order for two modes.
///
/// `b1a2` stands for `⟨β₁α₂⟩ = ⟨â₁†â₂⟩` and so on.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments<T> {
    pub a1: T,
    pub b1: T,
    pub a2: T,
    pub b2: T,
    pub a1a1: T,
    pub b1b1: T,
    pub b1a1: T,
    pub a2a2: T,
    pub b2b2: T,
    pub b2a2: T,
    pub a1a2: T,
    pub b1b2: T,
    pub b1a2: T,
    pub b2a1: T,
}

const N_MOMENTS: usize = 14;

impl<T: Copy> Moments<T> {
    fn to_array(self) -> [T; N_MOMENTS] {
        [
            self.a1, self.b1, self.a2, self.b2, self.a1a1, self.b1b1, self.b1a1, self.a2a2,
            self.b2b2, self.b2a2, self.a1a2, self.b1b2, self.b1a2, self.b2a1,
        ]
    }

    fn from_array(v: [T; N_MOMENTS]) -> Self {
        let [a1, b1, a2, b2, a1a1, b1b1, b1a1, a2a2, b2b2, b2a2, a1a2, b1b2, b1a2, b2a1] = v;
        Self { a1, b1, a2, b2, a1a1, b1b1, b1a1, a2a2, b2b2, b2a2, a1a2, b1b2, b1a2, b2a1 }
    }

    pub fn map<U: Copy>(self, f: impl Fn(T) -> U) -> Moments<U> {
        Moments::from_array(self.to_array().map(f))
    }
}

impl Moments<Complex64> {
    /// Products of one sample `(α₁, β₁, α₂, β₂)`.
    pub fn from_sample(s: &[Complex64; 4]) -> Self {
        let [a1, b1, a2, b2] = *s;
        Self {
            a1,
            b1,
            a2,
            b2,
            a1a1: a1 * a1,
            b1b1: b1 * b1,
            b1a1: b1 * a1,
            a2a2: a2 * a2,
            b2b2: b2 * b2,
            b2a2: b2 * a2,
            a1a2: a1 * a2,
            b1b2: b1 * b2,
            b1a2: b1 * a2,
            b2a1: b2 * a1,
        }
    }

    /// Mean photon number `Re⟨β_j α_j⟩` of mode `j ∈ {0, 1}`.
    pub fn photon_number(&self, mode: usize) -> f64 {
        if mode == 0 {
            self.b1a1.re
        } else {
            self.b2a2.re
        }
    }
}

/// Streaming compensated sums of all moment products.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentAccumulator {
    count: usize,
    sums: [[NeumaierSum; 2]; N_MOMENTS],
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, sample: &[Complex64; 4]) {
        let products = Moments::from_sample(sample).to_array();
        for (acc, z) in self.sums.iter_mut().zip(products) {
            acc[0].add(z.re);
            acc[1].add(z.im);
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a[0].merge(&b[0]);
            a[1].merge(&b[1]);
        }
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<Moments<Complex64>> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        let v = self.sums.map(|[re, im]| Complex64::new(re.value() / n, im.value() / n));
        Some(Moments::from_array(v))
    }
}

/// A value with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Ensemble moments together with per-batch means for error estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub n_samples: usize,
    pub mean: Moments<Complex64>,
    /// `(sample count, batch mean)` for contiguous trajectory batches.
    pub batches: Vec<(usize, Moments<Complex64>)>,
}

impl MomentSet {
    /// Combines per-batch accumulators; empty batches are skipped.
    pub fn from_batches(batches: &[MomentAccumulator]) -> Result<Self, ObservableError> {
        let mut total = MomentAccumulator::new();
        let mut means = Vec::with_capacity(batches.len());
        for b in batches {
            total.merge(b);
            if let Some(m) = b.mean() {
                means.push((b.count(), m));
            }
        }
        let mean = total.mean().ok_or(ObservableError::EmptyEnsemble)?;
        Ok(Self { n_samples: total.count(), mean, batches: means })
    }

    /// Statistic evaluated on the full ensemble, with the spread of its
    /// per-batch values as standard error.
    pub fn estimate(&self, f: impl Fn(&Moments<Complex64>) -> f64) -> Estimate {
        let per_batch: Vec<f64> = self.batches.iter().map(|(_, m)| f(m)).filter(|v| v.is_finite()).collect();
        Estimate { value: f(&self.mean), se: mean_and_se(&per_batch).1 }
    }

    /// Standard errors of the individual moments (modulus of the complex error).
    pub fn standard_errors(&self) -> Moments<f64> {
        let arrays: Vec<[Complex64; N_MOMENTS]> = self.batches.iter().map(|(_, m)| m.to_array()).collect();
        let mut se = [0.0; N_MOMENTS];
        for (k, slot) in se.iter_mut().enumerate() {
            let re: Vec<f64> = arrays.iter().map(|a| a[k].re).collect();
            let im: Vec<f64> = arrays.iter().map(|a| a[k].im).collect();
            *slot = mean_and_se(&re).1.hypot(mean_and_se(&im).1);
        }
        Moments::from_array(se)
    }
}

/// Moments of a snapshot with [`DEFAULT_BATCHES`] contiguous batches.
pub fn estimate_moments(snapshot: &EnsembleSnapshot, map: &ModeMap) -> Result<MomentSet, ObservableError> {
    let n = snapshot.states.len();
    if n == 0 {
        return Err(ObservableError::EmptyEnsemble);
    }
    let mut accs = Vec::new();
    for range in batch_ranges(n, DEFAULT_BATCHES) {
        let mut acc = MomentAccumulator::new();
        for state in &snapshot.states[range] {
            acc.push(&map.extract(state)?);
        }
        accs.push(acc);
    }
    MomentSet::from_batches(&accs)
}
