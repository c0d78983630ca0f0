//! Virial weights χ_K, η_K, ζ_K, Φ_K, Ψ_{A,B} and ρ.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quad::cumulative;

/// Degree-7 smoothstep: 0 at t ≤ 0, 1 at t ≥ 1, three vanishing derivatives at both ends.
fn smoothstep7(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t.powi(4) * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t.powi(3))
}

/// The base bump: 2 on [0, 1], 0 on [2, ∞), even and nonincreasing in |y|.
pub fn chi(y: f64) -> f64 {
    2.0 * (1.0 - smoothstep7(y.abs() - 1.0))
}

pub fn chi_prime(y: f64) -> f64 {
    let t = y.abs() - 1.0;
    if !(0.0..1.0).contains(&t) {
        return 0.0;
    }
    let d = 140.0 * t.powi(3) * (1.0 - t).powi(3);
    -2.0 * d * y.signum()
}

/// Weights attached to one scale K.
#[derive(Clone, Debug, Serialize)]
pub struct KWeights {
    pub k: f64,
    /// χ(x/K)
    pub chi: Vec<f64>,
    /// sech(2x/K)
    pub eta: Vec<f64>,
    /// exp(−|x|/K (1 − χ(√ω₀x)/2))
    pub zeta: Vec<f64>,
    /// ∫₀ˣ ζ_K²
    pub phi: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightSet {
    pub omega0: f64,
    pub a: KWeights,
    pub b: KWeights,
    /// χ_A² Φ_B and its derivative.
    pub psi_ab: Vec<f64>,
    pub psi_ab_prime: Vec<f64>,
    /// sech(√ω₀ x/10)
    pub rho: Vec<f64>,
    /// The grid does not reach ±2A, so χ_A and η_A are seen only near their plateau.
    pub truncated: bool,
}

fn zeta_k(x: f64, k: f64, omega0: f64) -> f64 {
    (-x.abs() / k * (1.0 - 0.5 * chi(omega0.sqrt() * x))).exp()
}

fn family(grid: &Grid, k: f64, omega0: f64) -> KWeights {
    let xs = grid.xs();
    let zeta: Vec<f64> = xs.iter().map(|&x| zeta_k(x, k, omega0)).collect();
    let c = grid.center();
    // Run one node past the right end so that node 0 gets Φ(−L) = −Φ(L).
    let mut sq: Vec<f64> = zeta[c..].iter().map(|z| z * z).collect();
    sq.push(zeta_k(grid.x(grid.n), k, omega0).powi(2));
    let right = cumulative(&sq, grid.h);
    let mut phi = vec![0.0; grid.n];
    for (i, v) in right.iter().enumerate() {
        if c + i < grid.n {
            phi[c + i] = *v;
        }
        if i > 0 && c >= i {
            phi[c - i] = -v;
        }
    }
    KWeights {
        k,
        chi: xs.iter().map(|&x| chi(x / k)).collect(),
        eta: xs.iter().map(|&x| 1.0 / (2.0 * x / k).cosh()).collect(),
        zeta,
        phi,
    }
}

pub fn build_weights(omega0: f64, a: f64, b: f64, grid: &Grid) -> Result<WeightSet> {
    let edge = 1.0 / omega0.sqrt();
    if !(omega0 > 0.0 && a > b && b > edge && edge > 1.0) {
        return Err(Error::Argument(format!("need A > B > ω₀^(−1/2) > 1, got A = {a}, B = {b}, ω₀ = {omega0}")));
    }
    let wa = family(grid, a, omega0);
    let wb = family(grid, b, omega0);
    let xs = grid.xs();
    let psi_ab: Vec<f64> = (0..grid.n).map(|j| wa.chi[j].powi(2) * wb.phi[j]).collect();
    let psi_ab_prime = (0..grid.n)
        .map(|j| {
            let x = xs[j];
            2.0 * wa.chi[j] * chi_prime(x / a) / a * wb.phi[j] + wa.chi[j].powi(2) * wb.zeta[j].powi(2)
        })
        .collect();
    let rho = xs.iter().map(|&x| 1.0 / (omega0.sqrt() * x / 10.0).cosh()).collect();
    Ok(WeightSet { omega0, a: wa, b: wb, psi_ab, psi_ab_prime, rho, truncated: grid.half_length < 2.0 * a })
}
