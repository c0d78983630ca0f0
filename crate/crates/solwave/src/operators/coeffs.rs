//! Node coefficients of the differential operators built on a profile.
//!
//! Every quotient by a power of φ is formed from the termwise weighted
//! evaluations of g and G, so the arrays stay finite deep in the tails.

use crate::error::Result;
use crate::quad::cumulative_tail;
use crate::soliton::SolitonProfile;

/// Weighted nonlinearity values at one node.
#[derive(Clone, Copy, Debug, Default)]
struct Local {
    s: f64,
    g0: f64,
    /// p²g'(p²), p⁴g'', p⁶g''', p⁸g⁽⁴⁾
    w1: f64,
    w2: f64,
    w3: f64,
    w4: f64,
    /// G(p²)/p²
    gq: f64,
}

impl Local {
    fn at(p: &SolitonProfile, j: usize) -> Self {
        let nl = &p.nl;
        let phi = p.phi[0][j];
        if phi == 0.0 {
            return Local::default();
        }
        Local {
            s: phi * phi,
            g0: nl.dw(0, phi, 0),
            w1: nl.dw(1, phi, 2),
            w2: nl.dw(2, phi, 4),
            w3: nl.dw(3, phi, 6),
            w4: nl.dw(4, phi, 8),
            gq: nl.gw(phi, -2),
        }
    }
}

/// Coefficients of `c₄∂⁴ + 2∂²(c_R ∂·) + ∂(b ∂·) + c ∂ + d`.
#[derive(Clone, Debug)]
pub struct FourthOrder {
    pub c4: f64,
    pub cr: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

fn locals(p: &SolitonProfile) -> Vec<Local> {
    (0..p.grid.n).map(|j| Local::at(p, j)).collect()
}

pub fn v_lplus(p: &SolitonProfile) -> Vec<f64> {
    let w = p.omega;
    locals(p).iter().map(|l| w - 3.0 * l.s + l.g0 + 2.0 * l.w1).collect()
}

pub fn v_lminus(p: &SolitonProfile) -> Vec<f64> {
    let w = p.omega;
    locals(p).iter().map(|l| w - l.s + l.g0).collect()
}

/// a⁺ = −g + 2G/φ².
pub fn a_plus(p: &SolitonProfile) -> Vec<f64> {
    locals(p).iter().map(|l| -l.g0 + 2.0 * l.gq).collect()
}

/// a⁻ = −5g + 2φ²g' + 6G/φ².
pub fn a_minus(p: &SolitonProfile) -> Vec<f64> {
    locals(p).iter().map(|l| -5.0 * l.g0 + 2.0 * l.w1 + 6.0 * l.gq).collect()
}

/// (a⁺)' and (a⁻)' by the chain rule through φ.
pub fn a_primes(p: &SolitonProfile) -> (Vec<f64>, Vec<f64>) {
    let nl = &p.nl;
    let n = p.grid.n;
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for j in 0..n {
        let phi = p.phi[0][j];
        if phi == 0.0 {
            continue;
        }
        let pg1 = nl.dw(1, phi, 1);
        let p3g2 = nl.dw(2, phi, 3);
        let g_over = nl.dw(0, phi, -1);
        let big = nl.gw(phi, -3);
        let dq = p.phi[1][j];
        plus[j] = (-2.0 * pg1 + 4.0 * g_over - 4.0 * big) * dq;
        minus[j] = (-6.0 * pg1 + 4.0 * p3g2 + 12.0 * g_over - 12.0 * big) * dq;
    }
    (plus, minus)
}

/// Zeroth-order coefficient of S²: ω − g + 2G/φ².
pub fn s2_zeroth(p: &SolitonProfile) -> Vec<f64> {
    let w = p.omega;
    locals(p).iter().map(|l| w - l.g0 + 2.0 * l.gq).collect()
}

pub fn mminus_s2(p: &SolitonProfile) -> FourthOrder {
    let w = p.omega;
    let r = p.ratio();
    let ls = locals(p);
    let b = ls.iter().map(|l| 2.0 * l.w1 - 4.0 * l.g0 + 4.0 * l.gq).collect();
    let c = ls
        .iter()
        .zip(&r)
        .map(|(l, &r)| r * (4.0 * l.w1 - 6.0 * l.g0 - 4.0 * l.w2 + 4.0 * l.gq - 2.0 * w))
        .collect();
    let d = ls
        .iter()
        .map(|l| {
            w * w + 2.0 * w * (l.g0 - l.w1 + 2.0 * l.w2) - 2.0 * l.w1 * l.gq + l.s * l.w1 - 2.0 * l.s * l.w2
                + 4.0 * l.w2 * l.gq
                - 2.0 * l.s * l.g0
                + 2.0 * l.s * l.gq
                + l.g0 * l.g0
        })
        .collect();
    FourthOrder { c4: -1.0, cr: r, b, c, d }
}

pub fn s2_lplus(p: &SolitonProfile) -> FourthOrder {
    let w = p.omega;
    let r = p.ratio();
    let ls = locals(p);
    let b = ls.iter().map(|l| -l.s - 2.0 * l.g0 + 2.0 * l.gq + 2.0 * l.w1).collect();
    let c = ls
        .iter()
        .zip(&r)
        .map(|(l, &r)| r * (-2.0 * l.s + 4.0 * l.w1 - 2.0 * l.g0 + 4.0 * l.w2 - 2.0 * w))
        .collect();
    let d = ls
        .iter()
        .map(|l| {
            let (s, g0, w1, w2, w3, gq) = (l.s, l.g0, l.w1, l.w2, l.w3, l.gq);
            w * w + w * (-3.0 * s + 20.0 * w2 + 8.0 * w3 + 2.0 * w1 + 2.0 * gq) + 3.0 * s * s - 3.0 * s * g0
                - 3.0 * s * w1
                + 4.0 * g0 * w1
                - 2.0 * w1 * gq
                - 12.0 * s * w2
                + 16.0 * w2 * gq
                + 4.0 * g0 * w2
                - 4.0 * s * w3
                + 8.0 * w3 * gq
                - g0 * g0
                + 2.0 * g0 * gq
        })
        .collect();
    FourthOrder { c4: -1.0, cr: r, b, c, d }
}

/// ω ∂_ω(φ'/φ) = (Λ'φ − Λφ')/φ².
///
/// The numerator is used directly in the core. Farther out it comes from the
/// backward integral of its derivative ωφ² − 2Λφ³(1 − g'), started from the
/// tail asymptote −√ω φ²/2, since Λ loses relative accuracy near the wall.
pub fn omega_ratio(p: &SolitonProfile) -> Result<Vec<f64>> {
    let lam = p.lambda()?;
    let dlam = p.lambda_prime()?;
    let n = p.grid.n;
    let c = p.grid.center();
    let w = p.omega;
    let ls = locals(p);
    let deriv: Vec<f64> = (c..n)
        .map(|j| {
            let l = &ls[j];
            let lr = lam[j] / p.phi[0][j];
            w * l.s - 2.0 * lr * (l.s * l.s - l.s * l.w1)
        })
        .collect();
    let tail = cumulative_tail(&deriv, p.grid.h);
    let n_end = -0.5 * w.sqrt() * ls[n - 1].s;
    let core = 1e-4 * p.zeta;
    let mut out = vec![0.0; n];
    for j in c..n {
        let phi = p.phi[0][j];
        let v = if phi > core {
            (dlam[j] * phi - lam[j] * p.phi[1][j]) / (phi * phi)
        } else if ls[j].s > 0.0 {
            (n_end - tail[j - c]) / ls[j].s
        } else {
            -0.5 * w.sqrt()
        };
        out[j] = v;
        if j > c {
            out[2 * c - j] = -v;
        }
    }
    Ok(out)
}

pub fn q_minus(p: &SolitonProfile) -> Result<FourthOrder> {
    let w = p.omega;
    let r = p.ratio();
    let wr = omega_ratio(p)?;
    let lam = p.lambda()?;
    let dlam = p.lambda_prime()?;
    let ls = locals(p);
    let n = p.grid.n;
    let (mut b, mut c, mut d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for j in 0..n {
        let l = &ls[j];
        let (s, g0, w1, w2, w3, gq) = (l.s, l.g0, l.w1, l.w2, l.w3, l.gq);
        let (lr, l1r) = if s > 0.0 { (lam[j] / p.phi[0][j], dlam[j] / p.phi[0][j]) } else { (0.0, 0.0) };
        b[j] = lr * (-4.0 * w1 + 4.0 * w2 + 8.0 * g0 - 8.0 * gq);
        c[j] = l1r * (4.0 * w1 - 4.0 * w2 - 6.0 * g0 + 4.0 * gq)
            + lr * r[j] * (-8.0 * w1 - 4.0 * w2 - 8.0 * w3 + 14.0 * g0 - 12.0 * gq)
            - 2.0 * w * r[j]
            - 2.0 * w * wr[j];
        d[j] = 2.0 * w * w
            + 2.0 * w * (g0 - w1 + 2.0 * w2)
            + 4.0 * w * lr * (3.0 * w2 + 2.0 * w3)
            + lr * (4.0 * w2 * gq - 10.0 * s * w2 - 4.0 * s * w3 + 8.0 * g0 * w2 + 8.0 * w3 * gq);
    }
    Ok(FourthOrder { c4: 0.0, cr: wr, b, c, d })
}

pub fn q_plus(p: &SolitonProfile) -> Result<FourthOrder> {
    let w = p.omega;
    let r = p.ratio();
    let wr = omega_ratio(p)?;
    let lam = p.lambda()?;
    let dlam = p.lambda_prime()?;
    let ls = locals(p);
    let n = p.grid.n;
    let (mut b, mut c, mut d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for j in 0..n {
        let l = &ls[j];
        let (s, g0, w1, w2, w3, w4, gq) = (l.s, l.g0, l.w1, l.w2, l.w3, l.w4, l.gq);
        let (lr, l1r) = if s > 0.0 { (lam[j] / p.phi[0][j], dlam[j] / p.phi[0][j]) } else { (0.0, 0.0) };
        b[j] = lr * (-2.0 * s + 4.0 * g0 - 4.0 * gq + 4.0 * w2);
        c[j] = lr * r[j] * (-2.0 * s + 20.0 * w2 + 8.0 * w3 + 2.0 * g0)
            + l1r * (-2.0 * s + 4.0 * w1 + 4.0 * w2 - 2.0 * g0)
            - 2.0 * w * r[j]
            - 2.0 * w * wr[j];
        d[j] = 2.0 * w * w
            + w * (-3.0 * s + 20.0 * w2 + 8.0 * w3 + 2.0 * w1 + 2.0 * gq)
            + 2.0 * w * lr * (-3.0 * s + 42.0 * w2 + 44.0 * w3 + 8.0 * w4 + 2.0 * w1 + 2.0 * g0 - 2.0 * gq)
            + lr * (12.0 * s * s - 6.0 * s * g0 - 18.0 * s * w1 - 78.0 * s * w2 + 8.0 * w1 * w1 + 56.0 * g0 * w2
                + 28.0 * w2 * gq
                - 56.0 * s * w3
                + 64.0 * w3 * gq
                + 8.0 * w1 * w2
                + 24.0 * g0 * w3
                - 8.0 * s * w4
                + 16.0 * w4 * gq
                + 4.0 * g0 * g0
                - 4.0 * g0 * gq
                + 4.0 * w1 * gq);
    }
    Ok(FourthOrder { c4: 0.0, cr: wr, b, c, d })
}
