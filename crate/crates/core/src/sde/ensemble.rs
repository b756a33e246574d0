use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::rng::{fill_wiener_increments, substream};
use super::scheme::StepWorkspace;
use super::{IntegrationConfig, SdeError, SdeSystem, TrajectoryState};

/// All trajectory states at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSnapshot {
    /// Requested sample time; the states are taken at the first grid point
    /// at or after it.
    pub time: f64,
    pub states: Vec<Vec<Complex64>>,
}

impl EnsembleSnapshot {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Projected samples of one trajectory, `width` values per sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub width: usize,
    pub samples: Vec<Complex64>,
}

impl TrajectoryRecord {
    pub fn sample(&self, k: usize) -> &[Complex64] {
        &self.samples[k * self.width..(k + 1) * self.width]
    }

    pub fn n_samples(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.samples.len() / self.width
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFailure {
    pub index: usize,
    pub error: SdeError,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchOutcome {
    pub n_trajectories: usize,
    pub failures: Vec<TrajectoryFailure>,
}

impl BatchOutcome {
    pub fn n_succeeded(&self) -> usize {
        self.n_trajectories - self.failures.len()
    }
}

/// Integrates one trajectory from `t = 0` and calls `on_sample(k, state)` for
/// each requested sample time `k`.
fn integrate_with<S, R, F>(
    system: &S,
    config: &IntegrationConfig,
    rng: &mut R,
    initial: &[Complex64],
    mut on_sample: F,
) -> Result<(), SdeError>
where
    S: SdeSystem + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(usize, &[Complex64]),
{
    let dim = system.dimension();
    if initial.len() != dim {
        return Err(SdeError::Dimension { expected: dim, got: initial.len() });
    }
    let sample_steps = config.sample_steps();
    let n_steps = config.n_steps();
    let mut state = TrajectoryState::new(initial.to_vec(), 0.0);
    let mut ws = StepWorkspace::new(dim);
    let mut dw = vec![0.0; dim];
    let mut next = 0;

    for step in 0..=n_steps {
        while next < sample_steps.len() && sample_steps[next] == step {
            on_sample(next, &state.variables);
            next += 1;
        }
        if step == n_steps || next == sample_steps.len() {
            break;
        }
        fill_wiener_increments(rng, config.dt, &mut dw);
        config.scheme.step(system, &mut state, config.dt, &dw, &mut ws)?;
        state.time = (step + 1) as f64 * config.dt;
    }
    Ok(())
}

/// Integrates a single trajectory with a fixed step and returns the state at
/// every sample time.
pub fn integrate_trajectory<S, R>(
    system: &S,
    config: &IntegrationConfig,
    rng: &mut R,
    initial: &[Complex64],
) -> Result<Vec<(f64, Vec<Complex64>)>, SdeError>
where
    S: SdeSystem + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let mut out = Vec::with_capacity(config.sample_times.len());
    integrate_with(system, config, rng, initial, |k, x| {
        out.push((config.sample_times[k], x.to_vec()))
    })?;
    Ok(out)
}

/// Runs `n_trajectories` independent trajectories and hands each successful
/// one to `consume` in trajectory-index order.
///
/// Trajectory `i` draws its noise from `substream(master_seed, i)`, and
/// trajectories are integrated in parallel in chunks of `chunk_size`, so the
/// sequence seen by `consume` does not depend on the thread count.
/// `project` maps a full state onto the values kept per sample.
pub fn run_batch_chunked<S, P, F>(
    system: &S,
    config: &IntegrationConfig,
    initial: &[Complex64],
    chunk_size: usize,
    width: usize,
    project: P,
    mut consume: F,
) -> Result<BatchOutcome, SdeError>
where
    S: SdeSystem + ?Sized,
    P: Fn(&[Complex64], &mut [Complex64]) + Sync,
    F: FnMut(&TrajectoryRecord),
{
    config.validate()?;
    let n = config.n_trajectories;
    let n_samples = config.sample_times.len();
    let chunk_size = chunk_size.max(1);
    let max_failures = (config.max_failure_fraction * n as f64).floor() as usize;
    let mut outcome = BatchOutcome { n_trajectories: n, failures: Vec::new() };

    let mut start = 0;
    while start < n {
        let end = (start + chunk_size).min(n);
        let results: Vec<Result<TrajectoryRecord, SdeError>> = (start..end)
            .into_par_iter()
            .map(|index| {
                let mut rng = substream(config.master_seed, index as u64);
                let mut samples = vec![Complex64::new(0.0, 0.0); n_samples * width];
                integrate_with(system, config, &mut rng, initial, |k, x| {
                    project(x, &mut samples[k * width..(k + 1) * width])
                })
                .map_err(|e| SdeError::Trajectory { index, source: Box::new(e) })?;
                Ok(TrajectoryRecord { index, width, samples })
            })
            .collect();

        for (offset, result) in results.into_iter().enumerate() {
            match result {
                Ok(record) => consume(&record),
                Err(error) => outcome.failures.push(TrajectoryFailure { index: start + offset, error }),
            }
        }
        if outcome.failures.len() > max_failures {
            return Err(SdeError::TooManyFailures {
                failed: outcome.failures.len(),
                total: n,
                limit: config.max_failure_fraction,
                first: Box::new(outcome.failures[0].error.clone()),
            });
        }
        start = end;
    }
    Ok(outcome)
}

/// Full-state snapshots of every surviving trajectory at every sample time.
pub fn run_batch<S>(
    system: &S,
    config: &IntegrationConfig,
    initial: &[Complex64],
) -> Result<(Vec<EnsembleSnapshot>, BatchOutcome), SdeError>
where
    S: SdeSystem + ?Sized,
{
    let dim = system.dimension();
    let mut snapshots: Vec<EnsembleSnapshot> = config
        .sample_times
        .iter()
        .map(|&time| EnsembleSnapshot { time, states: Vec::with_capacity(config.n_trajectories) })
        .collect();
    let outcome = run_batch_chunked(
        system,
        config,
        initial,
        1024,
        dim,
        |x, out| out.copy_from_slice(x),
        |record| {
            for (k, snap) in snapshots.iter_mut().enumerate() {
                snap.states.push(record.sample(k).to_vec());
            }
        },
    )?;
    Ok((snapshots, outcome))
}
