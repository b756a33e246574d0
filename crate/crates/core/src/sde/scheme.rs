use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{SdeError, SdeSystem, TrajectoryState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    /// Explicit derivative-free weak order-2.0 scheme of Platen type for
    /// diagonal noise.
    #[serde(rename = "platen2")]
    WeakOrder2Platen,
}

impl Scheme {
    pub fn step<S: SdeSystem + ?Sized>(
        self,
        system: &S,
        state: &mut TrajectoryState,
        dt: f64,
        increments: &[f64],
        ws: &mut StepWorkspace,
    ) -> Result<(), SdeError> {
        match self {
            Scheme::EulerMaruyama => euler_maruyama_step(system, state, dt, increments, ws),
            Scheme::WeakOrder2Platen => platen_weak2_step(system, state, dt, increments, ws),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Scheme::EulerMaruyama => "em",
            Scheme::WeakOrder2Platen => "platen2",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "em" | "euler_maruyama" => Ok(Scheme::EulerMaruyama),
            "platen2" | "weak2" => Ok(Scheme::WeakOrder2Platen),
            other => Err(format!("unknown scheme `{other}` (expected em or platen2)")),
        }
    }
}

/// Scratch buffers reused across steps of one trajectory.
#[derive(Debug, Clone)]
pub struct StepWorkspace {
    drift0: Vec<Complex64>,
    drift1: Vec<Complex64>,
    amp0: Vec<Complex64>,
    amp_plus: Vec<Complex64>,
    amp_minus: Vec<Complex64>,
    support: Vec<Complex64>,
}

impl StepWorkspace {
    pub fn new(dimension: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dimension];
        Self {
            drift0: z.clone(),
            drift1: z.clone(),
            amp0: z.clone(),
            amp_plus: z.clone(),
            amp_minus: z.clone(),
            support: z,
        }
    }
}

fn check_finite(values: &[Complex64], quantity: &'static str, time: f64) -> Result<(), SdeError> {
    if values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(SdeError::NonFinite { quantity, time })
    }
}

fn check_lengths(dim: usize, state: &TrajectoryState, increments: &[f64]) -> Result<(), SdeError> {
    if state.variables.len() != dim {
        return Err(SdeError::Dimension { expected: dim, got: state.variables.len() });
    }
    if increments.len() != dim {
        return Err(SdeError::Dimension { expected: dim, got: increments.len() });
    }
    Ok(())
}

/// `x' = x + a(x, t) dt + b(x, t) ∘ dW`, then the system's post-step hook.
pub fn euler_maruyama_step<S: SdeSystem + ?Sized>(
    system: &S,
    state: &mut TrajectoryState,
    dt: f64,
    increments: &[f64],
    ws: &mut StepWorkspace,
) -> Result<(), SdeError> {
    let dim = system.dimension();
    check_lengths(dim, state, increments)?;
    let t = state.time;
    system.drift(&state.variables, t, &mut ws.drift0);
    system.diffusion(&state.variables, t, &mut ws.amp0);

    for k in 0..dim {
        state.variables[k] += ws.drift0[k] * dt + ws.amp0[k] * increments[k];
    }
    finish_step(system, state, dt, ws, &[("drift", t), ("diffusion", t)])
}

/// One step of the weak order-2 scheme.
///
/// With `ȳ = y + a dt + b∘ΔW` and supporting values `r± = y + a dt ± b √dt`
/// (all coefficients evaluated at `t + dt` on the predicted points):
///
/// ```text
/// y' = y + ½(a(ȳ) + a(y)) dt
///        + ¼(b(r+) + b(r−) + 2b(y)) ∘ ΔW
///        + ¼(b(r+) − b(r−)) ∘ (ΔW² − dt) / √dt
/// ```
///
/// With zero diffusion this is exactly Heun's method.
pub fn platen_weak2_step<S: SdeSystem + ?Sized>(
    system: &S,
    state: &mut TrajectoryState,
    dt: f64,
    increments: &[f64],
    ws: &mut StepWorkspace,
) -> Result<(), SdeError> {
    let dim = system.dimension();
    check_lengths(dim, state, increments)?;
    let t = state.time;
    let t1 = t + dt;
    let sqrt_dt = dt.sqrt();
    let y = &state.variables;

    system.drift(y, t, &mut ws.drift0);
    system.diffusion(y, t, &mut ws.amp0);

    for k in 0..dim {
        ws.support[k] = y[k] + ws.drift0[k] * dt + ws.amp0[k] * increments[k];
    }
    system.drift(&ws.support, t1, &mut ws.drift1);

    for k in 0..dim {
        ws.support[k] = y[k] + ws.drift0[k] * dt + ws.amp0[k] * sqrt_dt;
    }
    system.diffusion(&ws.support, t1, &mut ws.amp_plus);

    for k in 0..dim {
        ws.support[k] = y[k] + ws.drift0[k] * dt - ws.amp0[k] * sqrt_dt;
    }
    system.diffusion(&ws.support, t1, &mut ws.amp_minus);

    let y = &mut state.variables;
    for k in 0..dim {
        let dw = increments[k];
        let bp = ws.amp_plus[k];
        let bm = ws.amp_minus[k];
        y[k] += (ws.drift0[k] + ws.drift1[k]) * (0.5 * dt)
            + (bp + bm + ws.amp0[k] * 2.0) * (0.25 * dw)
            + (bp - bm) * (0.25 * (dw * dw - dt) / sqrt_dt);
    }
    finish_step(
        system,
        state,
        dt,
        ws,
        &[("drift", t), ("diffusion", t), ("drift", t1), ("diffusion", t1), ("diffusion", t1)],
    )
}

/// Advances time and applies the hook. Non-finite coefficients propagate
/// into the state, so only the state is checked on the hot path; on failure
/// the buffers are inspected to name the first offending evaluation, listed
/// in `evaluations` in the order drift0, amp0, drift1, amp_plus, amp_minus.
fn finish_step<S: SdeSystem + ?Sized>(
    system: &S,
    state: &mut TrajectoryState,
    dt: f64,
    ws: &StepWorkspace,
    evaluations: &[(&'static str, f64)],
) -> Result<(), SdeError> {
    state.time += dt;
    let pre_hook_ok = check_finite(&state.variables, "state", state.time);
    system.post_step(&mut state.variables, state.time);
    if pre_hook_ok.is_ok() && check_finite(&state.variables, "state", state.time).is_ok() {
        return Ok(());
    }
    let buffers = [&ws.drift0, &ws.amp0, &ws.drift1, &ws.amp_plus, &ws.amp_minus];
    for (buf, &(quantity, time)) in buffers.iter().zip(evaluations) {
        check_finite(buf, quantity, time)?;
    }
    check_finite(&state.variables, "state", state.time)
}
