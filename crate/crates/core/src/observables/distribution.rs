//! Quadrature distribution functions from positive-P samples.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ModeMap, ObservableError};
use crate::sde::EnsembleSnapshot;
use crate::stats::trapezoid;

/// Largest kernel exponent accepted before a sample is excluded.
const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureTarget {
    X1,
    X2,
    P1,
    P2,
}

impl QuadratureTarget {
    pub const ALL: [QuadratureTarget; 4] =
        [QuadratureTarget::X1, QuadratureTarget::X2, QuadratureTarget::P1, QuadratureTarget::P2];

    /// Mode index, 0 or 1.
    pub fn mode(self) -> usize {
        match self {
            QuadratureTarget::X1 | QuadratureTarget::P1 => 0,
            QuadratureTarget::X2 | QuadratureTarget::P2 => 1,
        }
    }

    pub fn is_p(self) -> bool {
        matches!(self, QuadratureTarget::P1 | QuadratureTarget::P2)
    }

    pub fn name(self) -> &'static str {
        match self {
            QuadratureTarget::X1 => "x1",
            QuadratureTarget::X2 => "x2",
            QuadratureTarget::P1 => "p1",
            QuadratureTarget::P2 => "p2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureDistribution {
    pub target: QuadratureTarget,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Largest |imaginary part| of the ensemble-averaged kernel on the grid.
    pub imag_residue: f64,
    pub n_samples: usize,
    pub excluded: usize,
    /// More than 1% of samples had to be excluded.
    pub unreliable: bool,
}

impl QuadratureDistribution {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }
}

/// `n_points` equally spaced values covering `center ± 5·sd`.
pub fn default_grid(center: f64, sd: f64, n_points: usize) -> Vec<f64> {
    let half = 5.0 * sd;
    let n = n_points.max(2);
    (0..n).map(|k| center - half + 2.0 * half * k as f64 / (n - 1) as f64).collect()
}

pub fn distribution(
    snapshot: &EnsembleSnapshot,
    map: &ModeMap,
    target: QuadratureTarget,
    grid: &[f64],
) -> Result<QuadratureDistribution, ObservableError> {
    let j = target.mode();
    let pairs = snapshot
        .states
        .iter()
        .map(|s| map.extract(s).map(|v| (v[2 * j], v[2 * j + 1])))
        .collect::<Result<Vec<_>, _>>()?;
    distribution_from_modes(&pairs, target, grid)
}

/// Distribution from `(α_j, β_j)` samples of the target's mode.
///
/// `P(x) = √(2/π) ⟨exp(−2x² + 2xs − s²/2)⟩` with `s = α + β`, and
/// `P(p) = √(2/π) ⟨exp(−2p² − 2ipd + d²/2)⟩` with `d = α − β`.
pub fn distribution_from_modes(
    pairs: &[(Complex64, Complex64)],
    target: QuadratureTarget,
    grid: &[f64],
) -> Result<QuadratureDistribution, ObservableError> {
    if pairs.is_empty() {
        return Err(ObservableError::EmptyEnsemble);
    }
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(ObservableError::BadGrid);
    }
    let is_p = target.is_p();
    // the kernel modulus is bounded by exp((Re d)²/2) for p and exp((Im s)²/2) for x
    let kept: Vec<Complex64> = pairs
        .iter()
        .map(|&(a, b)| if is_p { a - b } else { a + b })
        .filter(|v| {
            let w = if is_p { v.re } else { v.im };
            w.is_finite() && v.re.is_finite() && v.im.is_finite() && w * w / 2.0 <= MAX_EXPONENT
        })
        .collect();
    let excluded = pairs.len() - kept.len();
    let norm = (2.0 / PI).sqrt();
    let mut density = Vec::with_capacity(grid.len());
    let mut imag_residue = 0.0f64;
    for &q in grid {
        let mut re = 0.0;
        let mut im = 0.0;
        for &v in &kept {
            let exponent = if is_p {
                Complex64::new(-2.0 * q * q, 0.0) - Complex64::new(0.0, 2.0 * q) * v + v * v / 2.0
            } else {
                Complex64::new(-2.0 * q * q, 0.0) + 2.0 * q * v - v * v / 2.0
            };
            let k = exponent.exp();
            re += k.re;
            im += k.im;
        }
        let n = kept.len().max(1) as f64;
        density.push(norm * re / n);
        imag_residue = imag_residue.max((norm * im / n).abs());
    }
    Ok(QuadratureDistribution {
        target,
        grid: grid.to_vec(),
        density,
        imag_residue,
        n_samples: pairs.len(),
        excluded,
        unreliable: excluded * 100 > pairs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub sigma: f64,
    pub amplitude: f64,
    /// `‖density − fit‖₂ / ‖density‖₂` over the grid.
    pub residual: f64,
}

fn gaussian(x: f64, amp: f64, mean: f64, sigma: f64) -> f64 {
    amp / (sigma * (2.0 * PI).sqrt()) * (-0.5 * ((x - mean) / sigma).powi(2)).exp()
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Least-squares fit of `A·N(μ, σ²)` by Levenberg–Marquardt; negative
/// density values are clamped to zero first.
pub fn fit_gaussian(dist: &QuadratureDistribution) -> Result<GaussianFit, ObservableError> {
    let x = &dist.grid;
    let y: Vec<f64> = dist.density.iter().map(|v| v.max(0.0)).collect();
    let total = trapezoid(x, &y);
    if !(total > 0.0) || !total.is_finite() || x.len() < 3 {
        return Err(ObservableError::DegenerateDensity);
    }
    let weights: Vec<f64> = y.iter().map(|v| v / total).collect();
    let mean0 = trapezoid(x, &x.iter().zip(&weights).map(|(a, w)| a * w).collect::<Vec<_>>());
    let var0 = trapezoid(x, &x.iter().zip(&weights).map(|(a, w)| (a - mean0).powi(2) * w).collect::<Vec<_>>());
    let spacing = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let mut p = [total, mean0, var0.sqrt().max(spacing * 0.5).ln()];

    let cost = |p: &[f64; 3]| -> f64 {
        let s = p[2].exp();
        x.iter().zip(&y).map(|(&xi, &yi)| (yi - gaussian(xi, p[0], p[1], s)).powi(2)).sum()
    };
    let mut current = cost(&p);
    let mut damping = 1e-3;
    for _ in 0..200 {
        let s = p[2].exp();
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&xi, &yi) in x.iter().zip(&y) {
            let g = gaussian(xi, p[0], p[1], s);
            let z = (xi - p[1]) / s;
            let grad = [g / p[0], g * z / s, g * (z * z - 1.0)];
            let r = yi - g;
            for a in 0..3 {
                jtr[a] += grad[a] * r;
                for b in 0..3 {
                    jtj[a][b] += grad[a] * grad[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut m = jtj;
            (0..3).for_each(|k| m[k][k] *= 1.0 + damping);
            let Some(step) = solve3(m, jtr) else { break };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let c = cost(&trial);
            if c.is_finite() && c <= current {
                let converged = (current - c) <= 1e-30 + 1e-15 * current;
                p = trial;
                current = c;
                damping = (damping * 0.3).max(1e-12);
                improved = !converged;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let norm_y = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(GaussianFit { mean: p[1], sigma: p[2].exp(), amplitude: p[0], residual: current.sqrt() / norm_y })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeResult {
    pub visibility: f64,
    /// A side peak beyond the central maximum was found.
    pub found: bool,
}

/// Visibility `(side − trough)/(side + trough)` of the first side lobe next
/// to the central peak, taking the larger of the two sides.
pub fn fringe_visibility(dist: &QuadratureDistribution) -> FringeResult {
    let y: Vec<f64> = dist.density.iter().map(|v| v.max(0.0)).collect();
    let n = y.len();
    let Some(center) = (0..n).max_by(|&a, &b| y[a].total_cmp(&y[b])) else {
        return FringeResult { visibility: 0.0, found: false };
    };
    let side = |step: isize| -> Option<f64> {
        let next = |i: usize| -> Option<usize> {
            let j = i as isize + step;
            (0..n as isize).contains(&j).then_some(j as usize)
        };
        let mut i = center;
        while let Some(j) = next(i) {
            if y[j] > y[i] {
                break;
            }
            i = j;
        }
        let trough = i;
        let mut peak = trough;
        while let Some(j) = next(peak) {
            if y[j] < y[peak] {
                break;
            }
            peak = j;
        }
        // a rise that runs into the grid edge is not a resolved side peak
        let interior = next(peak).is_some();
        (interior && peak != trough && y[peak] > y[trough])
            .then(|| (y[peak] - y[trough]) / (y[peak] + y[trough]))
    };
    match [side(1), side(-1)].into_iter().flatten().reduce(f64::max) {
        Some(v) => FringeResult { visibility: v, found: true },
        None => FringeResult { visibility: 0.0, found: false },
    }
}
