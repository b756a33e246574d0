//! Generic Ito SDE integration with diagonal real noise acting on complex
//! state vectors.
//!
//! A system supplies a drift vector and one diffusion amplitude per state
//! component; component `k` is driven only by the real Wiener increment
//! `dW_k`. The weak order-2 scheme additionally assumes that amplitude `k`
//! depends on the state only through component `k` (diagonal noise in the
//! Kloeden–Platen sense), which holds for every model in this crate.

mod ensemble;
mod rng;
mod scheme;

pub use ensemble::{
    integrate_trajectory, run_batch, run_batch_chunked, BatchOutcome, EnsembleSnapshot,
    TrajectoryFailure, TrajectoryRecord,
};
pub use rng::{fill_wiener_increments, generate_wiener_increments, substream, Substream};
pub use scheme::{euler_maruyama_step, platen_weak2_step, Scheme, StepWorkspace};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("non-finite {quantity} at t = {time}")]
    NonFinite { quantity: &'static str, time: f64 },
    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<SdeError>,
    },
    #[error("{failed} of {total} trajectories failed (limit {limit}); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit: f64,
        first: Box<SdeError>,
    },
    #[error("invalid integration config: {0}")]
    Config(String),
    #[error("state has length {got}, system dimension is {expected}")]
    Dimension { expected: usize, got: usize },
}

/// An Ito SDE `dx = a(x, t) dt + b(x, t) ∘ dW` with diagonal noise.
///
/// `drift` and `diffusion` write exactly `dimension()` entries into `out`.
pub trait SdeSystem: Sync {
    fn dimension(&self) -> usize;

    fn drift(&self, state: &[Complex64], t: f64, out: &mut [Complex64]);

    fn diffusion(&self, state: &[Complex64], t: f64, out: &mut [Complex64]);

    /// Applied after every completed step, at the new time.
    fn post_step(&self, _state: &mut [Complex64], _t: f64) {}
}

impl<S: SdeSystem + ?Sized> SdeSystem for &S {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn drift(&self, state: &[Complex64], t: f64, out: &mut [Complex64]) {
        (**self).drift(state, t, out)
    }
    fn diffusion(&self, state: &[Complex64], t: f64, out: &mut [Complex64]) {
        (**self).diffusion(state, t, out)
    }
    fn post_step(&self, state: &mut [Complex64], t: f64) {
        (**self).post_step(state, t)
    }
}

type VecFn = dyn Fn(&[Complex64], f64, &mut [Complex64]) + Send + Sync;
type HookFn = dyn Fn(&mut [Complex64], f64) + Send + Sync;

/// Closure-backed system, mostly for tests and quick experiments.
pub struct FnSystem {
    dimension: usize,
    drift: Box<VecFn>,
    diffusion: Box<VecFn>,
    hook: Option<Box<HookFn>>,
}

impl FnSystem {
    pub fn new<A, B>(dimension: usize, drift: A, diffusion: B) -> Self
    where
        A: Fn(&[Complex64], f64, &mut [Complex64]) + Send + Sync + 'static,
        B: Fn(&[Complex64], f64, &mut [Complex64]) + Send + Sync + 'static,
    {
        Self {
            dimension,
            drift: Box::new(drift),
            diffusion: Box::new(diffusion),
            hook: None,
        }
    }

    pub fn with_post_step<H>(mut self, hook: H) -> Self
    where
        H: Fn(&mut [Complex64], f64) + Send + Sync + 'static,
    {
        self.hook = Some(Box::new(hook));
        self
    }
}

impl SdeSystem for FnSystem {
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn drift(&self, state: &[Complex64], t: f64, out: &mut [Complex64]) {
        (self.drift)(state, t, out)
    }
    fn diffusion(&self, state: &[Complex64], t: f64, out: &mut [Complex64]) {
        (self.diffusion)(state, t, out)
    }
    fn post_step(&self, state: &mut [Complex64], t: f64) {
        if let Some(hook) = &self.hook {
            hook(state, t)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub variables: Vec<Complex64>,
    pub time: f64,
}

impl TrajectoryState {
    pub fn new(variables: Vec<Complex64>, time: f64) -> Self {
        Self { variables, time }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub sample_times: Vec<f64>,
    pub master_seed: u64,
    pub n_trajectories: usize,
    /// Fraction of trajectories allowed to fail before the batch aborts.
    #[serde(default)]
    pub max_failure_fraction: f64,
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<(), SdeError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SdeError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(SdeError::Config(format!(
                "t_final must be finite and non-negative, got {}",
                self.t_final
            )));
        }
        if self.n_trajectories == 0 {
            return Err(SdeError::Config("n_trajectories must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(SdeError::Config(format!(
                "max_failure_fraction must lie in [0, 1], got {}",
                self.max_failure_fraction
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        for &t in &self.sample_times {
            if !(0.0..=self.t_final).contains(&t) {
                return Err(SdeError::Config(format!(
                    "sample time {t} outside [0, {}]",
                    self.t_final
                )));
            }
            if t < prev {
                return Err(SdeError::Config("sample_times must be sorted".into()));
            }
            prev = t;
        }
        Ok(())
    }

    /// Total number of grid steps from 0 to `t_final`.
    pub fn n_steps(&self) -> usize {
        grid_index_at_or_after(self.t_final, self.dt)
    }

    /// Grid step index recorded for each requested sample time.
    pub fn sample_steps(&self) -> Vec<usize> {
        self.sample_times
            .iter()
            .map(|&t| grid_index_at_or_after(t, self.dt))
            .collect()
    }
}

/// Index of the first grid point `k·dt` that is not earlier than `t`.
pub(crate) fn grid_index_at_or_after(t: f64, dt: f64) -> usize {
    let k = (t / dt - 1e-9).ceil();
    if k <= 0.0 {
        0
    } else {
        k as usize
    }
}
