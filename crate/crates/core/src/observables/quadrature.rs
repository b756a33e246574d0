use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::moments::Moments;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Symmetrically ordered quadrature statistics with `x = (a + a†)/2` and
/// `p = (a − a†)/(2i)`; vacuum variances are 1/4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureStats {
    pub mean_x: [f64; 2],
    pub mean_p: [f64; 2],
    pub var_x: [f64; 2],
    pub var_p: [f64; 2],
    pub cov_xx: f64,
    pub cov_pp: f64,
    pub corr_xx: f64,
    pub corr_pp: f64,
    /// `⟨Δ(x₁+x₂)²⟩ + ⟨Δ(p₁−p₂)²⟩`; below 1 certifies inseparability.
    pub epr_sum: f64,
    pub photon_number: [f64; 2],
}

/// Mean vector and symmetrized second moments of `(x₁, p₁, x₂, p₂)`.
fn first_and_second(m: &Moments<Complex64>) -> ([f64; 4], [[f64; 4]; 4]) {
    let single = |a: Complex64, b: Complex64, aa: Complex64, bb: Complex64, ba: Complex64| {
        let x = ((a + b) / 2.0).re;
        let p = ((a - b) / (2.0 * I)).re;
        let xx = ((aa + bb + 2.0 * ba + 1.0) / 4.0).re;
        let pp = ((-aa - bb + 2.0 * ba + 1.0) / 4.0).re;
        let xp = ((aa - bb) / (4.0 * I)).re;
        (x, p, xx, pp, xp)
    };
    let (x1, p1, x1x1, p1p1, x1p1) = single(m.a1, m.b1, m.a1a1, m.b1b1, m.b1a1);
    let (x2, p2, x2x2, p2p2, x2p2) = single(m.a2, m.b2, m.a2a2, m.b2b2, m.b2a2);
    let x1x2 = ((m.a1a2 + m.b2a1 + m.b1a2 + m.b1b2) / 4.0).re;
    let p1p2 = (-(m.a1a2 - m.b2a1 - m.b1a2 + m.b1b2) / 4.0).re;
    let x1p2 = ((m.a1a2 - m.b2a1 + m.b1a2 - m.b1b2) / (4.0 * I)).re;
    let p1x2 = ((m.a1a2 + m.b2a1 - m.b1a2 - m.b1b2) / (4.0 * I)).re;
    let second = [
        [x1x1, x1p1, x1x2, x1p2],
        [x1p1, p1p1, p1x2, p1p2],
        [x1x2, p1x2, x2x2, x2p2],
        [x1p2, p1p2, x2p2, p2p2],
    ];
    ([x1, p1, x2, p2], second)
}

/// Covariance of `(x₁, p₁, x₂, p₂)`.
fn quadrature_covariance(m: &Moments<Complex64>) -> ([f64; 4], [[f64; 4]; 4]) {
    let (mean, mut cov) = first_and_second(m);
    for j in 0..4 {
        for k in 0..4 {
            cov[j][k] -= mean[j] * mean[k];
        }
    }
    (mean, cov)
}

pub fn quadrature_stats(m: &Moments<Complex64>) -> QuadratureStats {
    let (mean, cov) = quadrature_covariance(m);
    let corr = |a: usize, b: usize| {
        let d = cov[a][a] * cov[b][b];
        if d > 0.0 {
            cov[a][b] / d.sqrt()
        } else {
            f64::NAN
        }
    };
    QuadratureStats {
        mean_x: [mean[0], mean[2]],
        mean_p: [mean[1], mean[3]],
        var_x: [cov[0][0], cov[2][2]],
        var_p: [cov[1][1], cov[3][3]],
        cov_xx: cov[0][2],
        cov_pp: cov[1][3],
        corr_xx: corr(0, 2),
        corr_pp: corr(1, 3),
        epr_sum: cov[0][0] + cov[2][2] + 2.0 * cov[0][2] + cov[1][1] + cov[3][3] - 2.0 * cov[1][3],
        photon_number: [m.photon_number(0), m.photon_number(1)],
    }
}

/// Symmetric covariance of `r = 2(x₁, p₁, x₂, p₂)` (vacuum = identity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix4 {
    pub m: [[f64; 4]; 4],
}

impl CovarianceMatrix4 {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        (0..4).for_each(|k| m[k][k] = 1.0);
        Self { m }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { m: self.m.map(|row| row.map(|v| v * factor)) }
    }

    fn det2(&self, r: usize, c: usize) -> f64 {
        self.m[r][c] * self.m[r + 1][c + 1] - self.m[r][c + 1] * self.m[r + 1][c]
    }

    /// `det` of the mode-1 block.
    pub fn a_s(&self) -> f64 {
        self.det2(0, 0)
    }

    /// `det` of the mode-2 block.
    pub fn b_s(&self) -> f64 {
        self.det2(2, 2)
    }

    /// `det` of the cross block.
    pub fn c_s(&self) -> f64 {
        self.det2(0, 2)
    }

    /// `det` of the full matrix.
    pub fn d_s(&self) -> f64 {
        det4(&self.m)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..4).all(|j| (0..4).all(|k| (self.m[j][k] - self.m[k][j]).abs() <= tol))
    }
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    // Laplace expansion in complementary 2×2 minors of rows (0,1) and (2,3)
    let minor = |r: usize, a: usize, b: usize| m[r][a] * m[r + 1][b] - m[r][b] * m[r + 1][a];
    minor(0, 0, 1) * minor(2, 2, 3) - minor(0, 0, 2) * minor(2, 1, 3) + minor(0, 0, 3) * minor(2, 1, 2)
        + minor(0, 1, 2) * minor(2, 0, 3)
        - minor(0, 1, 3) * minor(2, 0, 2)
        + minor(0, 2, 3) * minor(2, 0, 1)
}

pub fn covariance_matrix(m: &Moments<Complex64>) -> CovarianceMatrix4 {
    let (_, cov) = quadrature_covariance(m);
    CovarianceMatrix4 { m: cov.map(|row| row.map(|v| 4.0 * v)) }
}
