//! Weak-order check of the integrators on an Ornstein–Uhlenbeck process.
//!
//! `dx = −γx dt + σ dW` has `E[x²](T) = x₀²e^{−2γT} + σ²(1 − e^{−2γT})/(2γ)`.
//! The weak error of the schemes at the step sizes of interest is far below
//! the plain Monte Carlo noise of `x²`, so the estimator subtracts control
//! variates built from the same Wiener increments: `W = Σ cₙΔWₙ` and
//! `Z = W² − E[W²]` with `cₙ = σe^{−γ(T − tₙ − dt/2)}`, the exact solution's
//! weight of step `n` taken at the interval midpoint. Both have known means,
//! so the estimator stays unbiased for every scheme.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::observables::Estimate;
use crate::sde::{fill_wiener_increments, substream, FnSystem, Scheme, SdeError, StepWorkspace, TrajectoryState};
use crate::stats::{compensated_sum, log_log_slope};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuProblem {
    pub gamma: f64,
    pub sigma: f64,
    pub x0: f64,
    pub t_final: f64,
}

impl Default for OuProblem {
    fn default() -> Self {
        Self { gamma: 1.0, sigma: 1.0, x0: 1.0, t_final: 1.0 }
    }
}

impl OuProblem {
    pub fn exact_second_moment(&self) -> f64 {
        let decay = (-2.0 * self.gamma * self.t_final).exp();
        self.x0 * self.x0 * decay + self.sigma * self.sigma * (1.0 - decay) / (2.0 * self.gamma)
    }

    pub fn system(&self) -> FnSystem {
        let (gamma, sigma) = (self.gamma, self.sigma);
        FnSystem::new(
            1,
            move |x: &[Complex64], _t, out: &mut [Complex64]| out[0] = -gamma * x[0],
            move |_x: &[Complex64], _t, out: &mut [Complex64]| out[0] = Complex64::new(sigma, 0.0),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub dt: f64,
    /// Control-variate estimate of `E[x²](T)`.
    pub second_moment: Estimate,
    pub exact: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scheme: Scheme,
    pub problem: OuProblem,
    pub n_trajectories: usize,
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of `ln|error|` against `ln dt`.
    pub slope: f64,
}

pub const DEFAULT_STEP_SIZES: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];

pub fn ou_weak_convergence(
    problem: &OuProblem,
    scheme: Scheme,
    step_sizes: &[f64],
    n_trajectories: usize,
    master_seed: u64,
) -> Result<ConvergenceReport, SdeError> {
    if n_trajectories < 3 {
        return Err(SdeError::Config("the convergence check needs at least 3 trajectories".into()));
    }
    let exact = problem.exact_second_moment();
    let mut points = Vec::with_capacity(step_sizes.len());
    for &dt in step_sizes {
        let second_moment = estimate_second_moment(problem, scheme, dt, n_trajectories, master_seed)?;
        points.push(ConvergencePoint { dt, second_moment, exact, error: second_moment.value - exact });
    }
    let dts: Vec<f64> = points.iter().map(|p| p.dt).collect();
    let errs: Vec<f64> = points.iter().map(|p| p.error.abs()).collect();
    let slope = if points.len() >= 2 { log_log_slope(&dts, &errs) } else { f64::NAN };
    Ok(ConvergenceReport { scheme, problem: *problem, n_trajectories, points, slope })
}

fn estimate_second_moment(
    problem: &OuProblem,
    scheme: Scheme,
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<Estimate, SdeError> {
    if !(dt > 0.0) {
        return Err(SdeError::Config(format!("dt must be positive, got {dt}")));
    }
    let steps = (problem.t_final / dt).round() as usize;
    let t_final = steps as f64 * dt;
    let weights: Vec<f64> = (0..steps)
        .map(|k| problem.sigma * (-problem.gamma * (t_final - (k as f64 + 0.5) * dt)).exp())
        .collect();
    let w_second = compensated_sum(weights.iter().map(|c| c * c * dt));
    let system = problem.system();

    // (x², W, W² − E[W²]) per trajectory
    let samples: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let mut state = TrajectoryState::new(vec![Complex64::new(problem.x0, 0.0)], 0.0);
            let mut ws = StepWorkspace::new(1);
            let mut dw = [0.0];
            let mut w = 0.0;
            for (k, c) in weights.iter().enumerate() {
                fill_wiener_increments(&mut rng, dt, &mut dw);
                scheme.step(&system, &mut state, dt, &dw, &mut ws)?;
                state.time = (k + 1) as f64 * dt;
                w += c * dw[0];
            }
            let x = state.variables[0].re;
            Ok([x * x, w, w * w - w_second])
        })
        .collect::<Result<_, SdeError>>()?;

    Ok(control_variate_mean(&samples))
}

/// Mean of column 0 after regressing out the zero-mean columns 1 and 2.
fn control_variate_mean(samples: &[[f64; 3]]) -> Estimate {
    let n = samples.len() as f64;
    let mean = |j: usize| compensated_sum(samples.iter().map(|s| s[j])) / n;
    let m = [mean(0), mean(1), mean(2)];
    let cov = |a: usize, b: usize| compensated_sum(samples.iter().map(|s| (s[a] - m[a]) * (s[b] - m[b]))) / (n - 1.0);
    let (s11, s12, s22) = (cov(1, 1), cov(1, 2), cov(2, 2));
    let (s01, s02) = (cov(0, 1), cov(0, 2));
    let det = s11 * s22 - s12 * s12;
    let (b1, b2) = if det.abs() > 1e-300 {
        ((s01 * s22 - s02 * s12) / det, (s02 * s11 - s01 * s12) / det)
    } else {
        (0.0, 0.0)
    };
    let value = m[0] - b1 * m[1] - b2 * m[2];
    let resid_var = compensated_sum(samples.iter().map(|s| {
        let r = (s[0] - m[0]) - b1 * (s[1] - m[1]) - b2 * (s[2] - m[2]);
        r * r
    })) / (n - 3.0).max(1.0);
    Estimate { value, se: (resid_var / n).sqrt() }
}
