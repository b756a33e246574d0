//! Two degenerate OPOs coupled through a mutual injection path.
//!
//! All variants are written in normalized units: field amplitudes are
//! scaled by the noise parameter `g` (`η = g·α`, `μ = g·β`), time is
//! `τ = γ'_s t`, and the pump is the normalized rate `λ = ε_p/ε_th`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sde::SdeSystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("γ_s = 0 and ζ = 0 leave the effective signal loss undefined")]
    NoLoss,
    #[error("γ_c = 0 with ζ > 0: a lossless injection path has no eliminated form")]
    ClosedPath,
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("variant {variant:?} does not support nonzero detuning")]
    UnsupportedDetuning { variant: DopoVariant },
}

/// Raw physical parameters. Rates are in units of the beamsplitter coupling
/// `ζ` (which is usually 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub gamma_s: f64,
    pub gamma_c: f64,
    pub gamma_p: f64,
    pub zeta: f64,
    /// Coupling phase `k_c z`; π is the out-of-phase injection.
    pub theta: f64,
    #[serde(default)]
    pub delta_s: f64,
    #[serde(default)]
    pub delta_p: f64,
    pub g: f64,
    pub lambda_f: f64,
    /// Ramp duration in units of `1/γ'_s`.
    pub t_f: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma_s: 0.1,
            gamma_c: 0.2,
            gamma_p: 100.0,
            zeta: 1.0,
            theta: std::f64::consts::PI,
            delta_s: 0.0,
            delta_p: 0.0,
            g: 0.01,
            lambda_f: 1.5,
            t_f: 200.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let rates = [
            ("gamma_s", self.gamma_s),
            ("gamma_c", self.gamma_c),
            ("gamma_p", self.gamma_p),
            ("zeta", self.zeta),
        ];
        for (name, value) in rates {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ModelError::InvalidParameter { name, value, reason: "must be finite and >= 0" });
            }
        }
        let positive = [("g", self.g), ("lambda_f", self.lambda_f), ("t_f", self.t_f)];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::InvalidParameter { name, value, reason: "must be finite and > 0" });
            }
        }
        for (name, value) in [("theta", self.theta), ("delta_s", self.delta_s), ("delta_p", self.delta_p)] {
            if !value.is_finite() {
                return Err(ModelError::InvalidParameter { name, value, reason: "must be finite" });
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> PumpSchedule {
        PumpSchedule { lambda_f: self.lambda_f, t_f: self.t_f }
    }
}

/// Quantities derived from [`ModelParams`] by eliminating the injection path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Effective signal loss `γ'_s = γ_s + ζ²/γ_c`.
    pub gamma_s_eff: f64,
    /// Normalized coupling `ξ = ζ²/(γ_s γ_c + ζ²)`.
    pub xi: f64,
    /// Classical threshold of the out-of-phase (or in-phase) mode, `1 − |ξ|`.
    pub lambda_th: f64,
    pub gamma_sn: f64,
    pub gamma_cn: f64,
    pub zeta_n: f64,
}

pub fn derive_params(p: &ModelParams) -> Result<DerivedParams, ModelError> {
    let (gs, gc, z) = (p.gamma_s, p.gamma_c, p.zeta);
    if gs == 0.0 && z == 0.0 {
        return Err(ModelError::NoLoss);
    }
    if z > 0.0 && gc == 0.0 {
        return Err(ModelError::ClosedPath);
    }
    let z2 = z * z;
    if z == 0.0 {
        return Ok(DerivedParams {
            gamma_s_eff: gs,
            xi: 0.0,
            lambda_th: 1.0,
            gamma_sn: 1.0,
            gamma_cn: gc / gs,
            zeta_n: 0.0,
        });
    }
    let denom = gs * gc + z2;
    let xi = z2 / denom;
    Ok(DerivedParams {
        gamma_s_eff: gs + z2 / gc,
        xi,
        lambda_th: 1.0 - xi.abs(),
        gamma_sn: gs * gc / denom,
        gamma_cn: gc * gc / denom,
        zeta_n: z * gc / denom,
    })
}

/// Linear pump ramp `λ(τ) = λ_f τ / t_f`, held at `λ_f` after `t_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSchedule {
    pub lambda_f: f64,
    pub t_f: f64,
}

pub fn pump_rate(s: &PumpSchedule, tau: f64) -> f64 {
    s.lambda_f * (tau / s.t_f).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DopoVariant {
    /// `(η₁, μ₁, η₂, μ₂, π₁, ρ₁, π₂, ρ₂, η_c, μ_c)`: signals, pumps (as
    /// `κα_p/γ'_s`) and injection path.
    Full10,
    /// `(η₁, μ₁, η₂, μ₂, η_c, μ_c)`: pumps adiabatically eliminated.
    PumpEliminated6,
    /// `(η₁, μ₁, η₂, μ₂)`: pumps and injection path eliminated.
    PathEliminated4,
}

impl DopoVariant {
    pub fn dimension(self) -> usize {
        match self {
            DopoVariant::Full10 => 10,
            DopoVariant::PumpEliminated6 => 6,
            DopoVariant::PathEliminated4 => 4,
        }
    }

    /// State indices of `(α₁, β₁, α₂, β₂)`.
    pub fn signal_indices(self) -> [usize; 4] {
        [0, 1, 2, 3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    None,
    ReflectClassicalSubspace,
}

/// Folds the real part of every signal variable into `[−√λ, √λ]` by mirror
/// reflection and drops its imaginary part. Other variables are untouched.
pub fn reflect_boundary(state: &mut [Complex64], signal: &[usize], lambda: f64) {
    let bound = lambda.max(0.0).sqrt();
    for &k in signal {
        state[k] = Complex64::new(fold_into(state[k].re, bound), 0.0);
    }
}

fn fold_into(x: f64, bound: f64) -> f64 {
    if bound == 0.0 {
        return 0.0;
    }
    if (-bound..=bound).contains(&x) {
        return x;
    }
    // reflections at ±bound make the map periodic with period 4·bound
    let period = 4.0 * bound;
    let y = (x + bound).rem_euclid(period);
    let y = if y > 2.0 * bound { period - y } else { y };
    y - bound
}

/// Steady-state injection-path field for given signal amplitudes.
pub fn steady_injection_field(
    p: &ModelParams,
    alpha_s1: Complex64,
    alpha_s2: Complex64,
    beta_s1: Complex64,
    beta_s2: Complex64,
) -> Result<(Complex64, Complex64), ModelError> {
    if p.gamma_c <= 0.0 {
        return Err(ModelError::ClosedPath);
    }
    let phase = unit_phase(p.theta);
    let alpha_c = (-alpha_s1 * p.zeta + phase * alpha_s2 * p.zeta) / p.gamma_c;
    let beta_c = (-beta_s1 * p.zeta + phase.conj() * beta_s2 * p.zeta) / p.gamma_c;
    Ok((alpha_c, beta_c))
}

/// `e^{iθ}` with rounding-level components set to zero, so that θ = π gives
/// exactly −1 and real trajectories stay real.
fn unit_phase(theta: f64) -> Complex64 {
    let snap = |v: f64| if v.abs() < 1e-14 { 0.0 } else { v };
    Complex64::new(snap(theta.cos()), snap(theta.sin()))
}

/// Principal square root with fast paths for real arguments.
#[inline]
fn sqrt_principal(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        if z.re >= 0.0 {
            Complex64::new(z.re.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-z.re).sqrt())
        }
    } else {
        z.sqrt()
    }
}

/// A DOPO variant bound to its parameters, pump schedule and boundary rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DopoSystem {
    pub params: ModelParams,
    pub derived: DerivedParams,
    pub variant: DopoVariant,
    pub schedule: PumpSchedule,
    pub boundary: BoundaryRule,
    phase: Complex64,
    signal_loss: Complex64,
    path_loss: Complex64,
    pump_loss: Complex64,
    pump_gain: f64,
}

/// Variants whose pump elimination needs `γ_p ≥ 10 γ'_s` produce this warning.
pub fn adiabatic_warning(p: &ModelParams, d: &DerivedParams, variant: DopoVariant) -> Option<String> {
    if variant != DopoVariant::Full10 && p.gamma_p < 10.0 * d.gamma_s_eff {
        Some(format!(
            "pump elimination assumes γ_p ≫ γ'_s, but γ_p = {} and γ'_s = {}",
            p.gamma_p, d.gamma_s_eff
        ))
    } else {
        None
    }
}

pub fn build_system(
    p: &ModelParams,
    variant: DopoVariant,
    schedule: PumpSchedule,
    boundary: BoundaryRule,
) -> Result<DopoSystem, ModelError> {
    p.validate()?;
    let d = derive_params(p)?;
    if variant != DopoVariant::Full10 && (p.delta_s != 0.0 || p.delta_p != 0.0) {
        return Err(ModelError::UnsupportedDetuning { variant });
    }
    let ge = d.gamma_s_eff;
    Ok(DopoSystem {
        params: *p,
        derived: d,
        variant,
        schedule,
        boundary,
        phase: unit_phase(p.theta),
        signal_loss: Complex64::new(d.gamma_sn, p.delta_s / ge),
        path_loss: Complex64::new(d.gamma_cn, p.delta_s / ge),
        pump_loss: Complex64::new(p.gamma_p / ge, p.delta_p / ge),
        pump_gain: p.gamma_p / ge,
    })
}

impl DopoSystem {
    pub fn lambda(&self, tau: f64) -> f64 {
        pump_rate(&self.schedule, tau)
    }

    pub fn vacuum(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.variant.dimension()]
    }

    fn pump_eliminated_drift(&self, x: &[Complex64], lambda: f64, out: &mut [Complex64]) {
        let (e1, m1, e2, m2, ec, mc) = (x[0], x[1], x[2], x[3], x[4], x[5]);
        let (gs, gc, zn) = (self.derived.gamma_sn, self.derived.gamma_cn, self.derived.zeta_n);
        let ph = self.phase;
        out[0] = -e1 * gs + m1 * (lambda - e1 * e1) + ec * zn;
        out[1] = -m1 * gs + e1 * (lambda - m1 * m1) + mc * zn;
        out[2] = -e2 * gs + m2 * (lambda - e2 * e2) - ec * ph * zn;
        out[3] = -m2 * gs + e2 * (lambda - m2 * m2) - mc * ph.conj() * zn;
        out[4] = -ec * gc - e1 * zn + e2 * ph * zn;
        out[5] = -mc * gc - m1 * zn + m2 * ph.conj() * zn;
    }

    fn path_eliminated_drift(&self, x: &[Complex64], lambda: f64, out: &mut [Complex64]) {
        let (e1, m1, e2, m2) = (x[0], x[1], x[2], x[3]);
        let xi = self.derived.xi;
        let ph = self.phase;
        out[0] = -e1 + m1 * (lambda - e1 * e1) + e2 * ph * xi;
        out[1] = -m1 + e1 * (lambda - m1 * m1) + m2 * ph.conj() * xi;
        out[2] = -e2 + m2 * (lambda - e2 * e2) + e1 * ph * xi;
        out[3] = -m2 + e2 * (lambda - m2 * m2) + m1 * ph.conj() * xi;
    }

    fn full_drift(&self, x: &[Complex64], lambda: f64, out: &mut [Complex64]) {
        let (e1, m1, e2, m2) = (x[0], x[1], x[2], x[3]);
        let (pa1, pb1, pa2, pb2) = (x[4], x[5], x[6], x[7]);
        let (ec, mc) = (x[8], x[9]);
        let zn = self.derived.zeta_n;
        let ph = self.phase;
        let (ls, lp, lc) = (self.signal_loss, self.pump_loss, self.path_loss);
        let gp = self.pump_gain;
        out[0] = -ls * e1 + m1 * pa1 + ec * zn;
        out[1] = -ls.conj() * m1 + e1 * pb1 + mc * zn;
        out[2] = -ls * e2 + m2 * pa2 - ec * ph * zn;
        out[3] = -ls.conj() * m2 + e2 * pb2 - mc * ph.conj() * zn;
        out[4] = -lp * pa1 + gp * lambda - e1 * e1 * gp;
        out[5] = -lp.conj() * pb1 + gp * lambda - m1 * m1 * gp;
        out[6] = -lp * pa2 + gp * lambda - e2 * e2 * gp;
        out[7] = -lp.conj() * pb2 + gp * lambda - m2 * m2 * gp;
        out[8] = -lc * ec - e1 * zn + e2 * ph * zn;
        out[9] = -lc.conj() * mc - m1 * zn + m2 * ph.conj() * zn;
    }
}

impl SdeSystem for DopoSystem {
    #[inline]
    fn dimension(&self) -> usize {
        self.variant.dimension()
    }

    #[inline]
    fn drift(&self, x: &[Complex64], t: f64, out: &mut [Complex64]) {
        let lambda = self.lambda(t);
        match self.variant {
            DopoVariant::PumpEliminated6 => self.pump_eliminated_drift(x, lambda, out),
            DopoVariant::PathEliminated4 => self.path_eliminated_drift(x, lambda, out),
            DopoVariant::Full10 => self.full_drift(x, lambda, out),
        }
    }

    #[inline]
    fn diffusion(&self, x: &[Complex64], t: f64, out: &mut [Complex64]) {
        let g = self.params.g;
        let zero = Complex64::new(0.0, 0.0);
        match self.variant {
            DopoVariant::Full10 => {
                // zero temperature: only the signal modes carry noise, √(κα_p)
                for k in 0..4 {
                    out[k] = sqrt_principal(x[4 + k]) * g;
                }
                out[4..].fill(zero);
            }
            DopoVariant::PumpEliminated6 | DopoVariant::PathEliminated4 => {
                let lambda = self.lambda(t);
                for k in 0..4 {
                    out[k] = sqrt_principal(lambda - x[k] * x[k]) * g;
                }
                out[4..].fill(zero);
            }
        }
    }

    #[inline]
    fn post_step(&self, state: &mut [Complex64], t: f64) {
        if self.boundary == BoundaryRule::ReflectClassicalSubspace {
            reflect_boundary(state, &self.variant.signal_indices(), self.lambda(t));
        }
    }
}
