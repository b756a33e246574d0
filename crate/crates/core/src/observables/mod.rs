//! Physical observables from positive-P ensembles.
//!
//! Every estimator works on the four signal amplitudes `(α₁, β₁, α₂, β₂)` in
//! photon units, i.e. after undoing the `g` scaling of the model variables.

mod discord;
mod distribution;
mod moments;
mod quadrature;

pub use discord::{
    binary_entropy, classical_mixture_covariance, gaussian_discord, gaussian_discord_with,
    resolve_discord_convention, symplectic_eigenvalues, ConventionEntry, ConventionResolution,
    DiscordConvention, DiscordValue, InfDetForm, LogBase, DISCORD_ANCHOR,
};
pub use distribution::{
    default_grid, distribution, distribution_from_modes, fit_gaussian, fringe_visibility,
    FringeResult, GaussianFit, QuadratureDistribution, QuadratureTarget,
};
pub use moments::{estimate_moments, Estimate, MomentAccumulator, MomentSet, Moments};
pub use quadrature::{covariance_matrix, quadrature_stats, CovarianceMatrix4, QuadratureStats};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::DopoSystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("{what} = {value} is outside the allowed domain")]
    Domain { what: &'static str, value: f64 },
    #[error("unphysical covariance: {0}")]
    Unphysical(String),
    #[error("density is identically zero or not finite")]
    DegenerateDensity,
    #[error("state has {got} components, mode map needs index {needed}")]
    Dimension { needed: usize, got: usize },
    #[error("grid must be sorted and nonempty")]
    BadGrid,
}

/// Where the signal amplitudes live in a state vector and how to rescale
/// them to photon units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMap {
    /// Indices of `(α₁, β₁, α₂, β₂)`.
    pub indices: [usize; 4],
    /// Multiplier from model variables to field amplitudes (`1/g`).
    pub scale: f64,
}

impl ModeMap {
    /// Identity map for states that already hold `(α₁, β₁, α₂, β₂)`.
    pub fn unscaled() -> Self {
        Self { indices: [0, 1, 2, 3], scale: 1.0 }
    }

    pub fn for_system(system: &DopoSystem) -> Self {
        Self { indices: system.variant.signal_indices(), scale: 1.0 / system.params.g }
    }

    pub fn extract(&self, state: &[Complex64]) -> Result<[Complex64; 4], ObservableError> {
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for (o, &i) in out.iter_mut().zip(&self.indices) {
            *o = *state.get(i).ok_or(ObservableError::Dimension { needed: i, got: state.len() })? * self.scale;
        }
        Ok(out)
    }
}
