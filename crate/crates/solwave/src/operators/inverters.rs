//! Green-function inverses of L₊ (on φ'^⊥) and of M₋.

use serde::Serialize;

use super::coeffs;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::quad::{cumulative, cumulative_tail};
use crate::soliton::SolitonProfile;

/// RK4 sub-steps per grid spacing for the M₋ kernel solutions.
const SUBSTEPS: usize = 8;

fn invert_lplus_real(w: &[f64], profile: &SolitonProfile) -> Result<Vec<f64>> {
    let a = profile.a_omega()?;
    let grid = &profile.grid;
    let dphi = &profile.phi[1];
    let (n, c, h) = (grid.n, grid.center(), grid.h);
    let aw: Vec<f64> = (0..n).map(|j| a[j] * w[j]).collect();
    let pw: Vec<f64> = (0..n).map(|j| dphi[j] * w[j]).collect();
    let mut u = vec![0.0; n];

    let right_aw = cumulative(&aw[c..], h);
    let right_pw = cumulative_tail(&pw[c..], h);
    for (i, j) in (c..n).enumerate() {
        u[j] = -dphi[j] * right_aw[i] - a[j] * right_pw[i];
    }

    let rev: Vec<f64> = aw[..=c].iter().rev().cloned().collect();
    let left_aw = cumulative(&rev, h);
    let left_pw = cumulative(&pw[..=c], h);
    for j in 0..c {
        // ∫₀ˣ A W = −∫ₓ⁰ A W
        let int_aw = -left_aw[c - j];
        u[j] = -dphi[j] * int_aw + a[j] * left_pw[j];
    }
    u[0] = 0.0;
    Ok(u)
}

/// U = I₊[W], the even-compatible solution of L₊U = W for W ⟂ φ'.
pub fn invert_lplus(w: &Field, profile: &SolitonProfile) -> Result<Field> {
    let grid = &profile.grid;
    if !grid.same_nodes(&w.grid) {
        return Err(Error::Argument("field and profile grids differ".into()));
    }
    let dphi = &profile.phi[1];
    let scale = grid.norm(dphi) * w.norm();
    for part in [w.re(), w.im()] {
        let overlap = grid.dot(&part, dphi);
        if overlap.abs() > 1e-10 * scale {
            return Err(Error::Precondition(format!("⟨W, φ'⟩ = {overlap:.3e} is not zero")));
        }
    }
    let re = invert_lplus_real(&w.re(), profile)?;
    let im = invert_lplus_real(&w.im(), profile)?;
    Ok(Field::from_parts(w.grid, &re, &im))
}

/// Kernel pair of M₋ with B₁ decaying to the right, B₂(x) = B₁(−x), and
/// B₁B₂' − B₁'B₂ = 1.
#[derive(Clone, Debug, Serialize)]
pub struct MminusInverter {
    pub b1: Vec<f64>,
    pub b1_prime: Vec<f64>,
    pub b2: Vec<f64>,
    pub b2_prime: Vec<f64>,
    /// Wronskian before normalization, at the origin.
    pub raw_wronskian: f64,
    /// Standard deviation of the normalized Wronskian over the nodes.
    pub wronskian_std: f64,
    #[serde(skip)]
    h: f64,
}

/// Quintic Hermite interpolation of φ on a cell from values, first and second
/// derivatives at both ends.
fn hermite5(y0: [f64; 3], y1: [f64; 3], h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 0.5 * (t3 - 2.0 * t4 + t5);
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    y0[0] * h0 + h * y0[1] * h1 + h * h * y0[2] * h2 + h * h * y1[2] * h3 + h * y1[1] * h4 + y1[0] * h5
}

impl MminusInverter {
    pub fn new(profile: &SolitonProfile) -> Result<Self> {
        let grid = &profile.grid;
        let (n, h) = (grid.n, grid.h);
        let nl = &profile.nl;
        let omega = profile.omega;
        // Node n (x = L) is the mirror image of node 0.
        let node = |j: usize| -> [f64; 3] {
            if j == n {
                [profile.phi[0][0], -profile.phi[1][0], profile.phi[2][0]]
            } else {
                [profile.phi[0][j], profile.phi[1][j], profile.phi[2][j]]
            }
        };
        let q = |p: f64| -> f64 {
            if p == 0.0 {
                omega
            } else {
                omega - 5.0 * nl.dw(0, p, 0) + 2.0 * nl.dw(1, p, 2) + 6.0 * nl.gw(p, -2)
            }
        };
        let a_end = coeffs::a_minus(profile)[0];
        let mut y = 1.0;
        let mut v = -(omega + a_end).max(0.0).sqrt();
        let mut b1 = vec![0.0; n + 1];
        let mut b1p = vec![0.0; n + 1];
        b1[n] = y;
        b1p[n] = v;
        let k = h / SUBSTEPS as f64;
        for cell in (0..n).rev() {
            let (lo, hi) = (node(cell), node(cell + 1));
            let qt = |t: f64| q(hermite5(lo, hi, h, t));
            for s in (0..SUBSTEPS).rev() {
                let t1 = (s + 1) as f64 / SUBSTEPS as f64;
                let tm = (s as f64 + 0.5) / SUBSTEPS as f64;
                let t0 = s as f64 / SUBSTEPS as f64;
                let (q1, qm, q0) = (qt(t1), qt(tm), qt(t0));
                // Step of −k for y' = v, v' = q y.
                let (k1y, k1v) = (v, q1 * y);
                let (y2, v2) = (y - 0.5 * k * k1y, v - 0.5 * k * k1v);
                let (k2y, k2v) = (v2, qm * y2);
                let (y3, v3) = (y - 0.5 * k * k2y, v - 0.5 * k * k2v);
                let (k3y, k3v) = (v3, qm * y3);
                let (y4, v4) = (y - k * k3y, v - k * k3v);
                let (k4y, k4v) = (v4, q0 * y4);
                y -= k / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
                v -= k / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            }
            if !y.is_finite() || !v.is_finite() {
                return Err(Error::Numeric("M₋ kernel solution overflowed".into()));
            }
            b1[cell] = y;
            b1p[cell] = v;
        }
        let b2: Vec<f64> = (0..n).map(|j| b1[n - j]).collect();
        let b2p: Vec<f64> = (0..n).map(|j| -b1p[n - j]).collect();
        b1.truncate(n);
        b1p.truncate(n);
        let c = grid.center();
        let raw = b1[c] * b2p[c] - b1p[c] * b2[c];
        let size = omega.sqrt() * (b1[c].powi(2) + b1p[c].powi(2) / omega);
        if raw.abs() < 1e-8 * size {
            return Err(Error::Singular(format!("M₋ kernel Wronskian {raw:.3e} is near zero")));
        }
        let s1 = 1.0 / raw.abs().sqrt();
        let s2 = raw.signum() * s1;
        let b1: Vec<f64> = b1.iter().map(|v| v * s1).collect();
        let b1p: Vec<f64> = b1p.iter().map(|v| v * s1).collect();
        let b2: Vec<f64> = b2.iter().map(|v| v * s2).collect();
        let b2p: Vec<f64> = b2p.iter().map(|v| v * s2).collect();
        let ws: Vec<f64> = (0..n).map(|j| b1[j] * b2p[j] - b1p[j] * b2[j]).collect();
        let mean = ws.iter().sum::<f64>() / n as f64;
        let var = ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n as f64;
        Ok(MminusInverter {
            b1,
            b1_prime: b1p,
            b2,
            b2_prime: b2p,
            raw_wronskian: raw,
            wronskian_std: var.sqrt(),
            h,
        })
    }

    fn apply_real(&self, w: &[f64]) -> Vec<f64> {
        let n = w.len();
        let b2w: Vec<f64> = (0..n).map(|j| self.b2[j] * w[j]).collect();
        let b1w: Vec<f64> = (0..n).map(|j| self.b1[j] * w[j]).collect();
        let left = cumulative(&b2w, self.h);
        let right = cumulative_tail(&b1w, self.h);
        let mut out: Vec<f64> = (0..n).map(|j| self.b1[j] * left[j] + self.b2[j] * right[j]).collect();
        out[0] = 0.0;
        out
    }

    /// J₋[W].
    pub fn apply(&self, w: &Field) -> Result<Field> {
        if w.values.len() != self.b1.len() {
            return Err(Error::Argument("field length does not match the inverter".into()));
        }
        Ok(Field::from_parts(w.grid, &self.apply_real(&w.re()), &self.apply_real(&w.im())))
    }
}

pub fn invert_mminus(w: &Field, profile: &SolitonProfile) -> Result<Field> {
    MminusInverter::new(profile)?.apply(w)
}
