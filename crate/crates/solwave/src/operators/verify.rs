//! The oracle suite behind `solwave operators verify`.

use num_complex::Complex64;
use serde::Serialize;

use super::{build_operator, composition_study, gaussian_bumps, invert_lplus, kernel_study, q_oracle, Composition, MminusInverter, OperatorKind};
use crate::error::Result;
use crate::grid::{Field, Grid};
use crate::nonlin::Nonlinearity;
use crate::soliton::SolitonProfile;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub check: String,
    pub residual: f64,
    pub order: Option<f64>,
    pub pass: bool,
}

fn convergence(name: &str, coarse: f64, fine: f64, min_ratio: f64) -> Check {
    let order = (coarse / fine).log2();
    Check { check: name.into(), residual: fine, order: Some(order), pass: coarse / fine >= min_ratio }
}

fn bound(name: &str, residual: f64, tol: f64) -> Check {
    Check { check: name.into(), residual, order: None, pass: residual <= tol }
}

/// Kernel, factorization, conjugate-identity, Q± and inverter checks at one
/// frequency on a Dirichlet grid with `n` nodes and L = 40/√ω; inverters
/// use 2n nodes.
pub fn verify_suite(nl: &Nonlinearity, omega: f64, n: usize, seed: u64) -> Result<Vec<Check>> {
    let g = Grid::dirichlet(n, 40.0 / omega.sqrt())?;
    let mut out = Vec::new();
    let lm = kernel_study(nl, omega, &g, OperatorKind::Lminus, |p| p.phi[0].clone())?;
    out.push(convergence("kernel L- phi", lm.coarse, lm.fine, 3.7));
    let lp = kernel_study(nl, omega, &g, OperatorKind::Lplus, |p| p.phi[1].clone())?;
    out.push(convergence("kernel L+ phi'", lp.coarse, lp.fine, 3.7));
    for (name, c) in [
        ("S2 vs S.S", Composition::S2),
        ("S*.S vs L-", Composition::SstarS),
        ("S.S* vs M+", Composition::SSstar),
        ("M-S2 expansion", Composition::MmS2),
        ("S2L+ expansion", Composition::S2Lp),
        ("conjugate identity", Composition::Conjugate),
    ] {
        let st = composition_study(c, nl, omega, &g, 20, seed)?;
        out.push(convergence(name, st.coarse, st.fine, 4.0));
    }
    let samples = gaussian_bumps(&g, omega, 10, seed);
    if !nl.is_zero() {
        out.push(bound("Q- vs omega difference", q_oracle(nl, omega, &g, false, &samples)?, 1e-3));
        out.push(bound("Q+ vs omega difference", q_oracle(nl, omega, &g, true, &samples)?, 1e-3));
    }

    // The inverters run on the refined grid, where Λ is resolved to 1e−6.
    let g = g.refined()?;
    let samples = gaussian_bumps(&g, omega, 10, seed);
    let p = SolitonProfile::full(nl, omega, &g)?;
    let w = Field::from_real(g, &p.phi[0].iter().map(|f| -omega * f).collect::<Vec<_>>());
    let lam_err = invert_lplus(&w, &p)?.re().iter().zip(p.lambda()?).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.push(bound("I+[-omega phi] vs Lambda", lam_err, 1e-6));
    let lp_op = build_operator(OperatorKind::Lplus, &p, &g, None)?;
    let mut worst = 0.0f64;
    for s in &samples {
        let re = s.re();
        let mut even: Vec<f64> = (0..g.n).map(|j| 0.5 * (re[j] + re[(g.n - j) % g.n])).collect();
        even[0] = 0.0;
        let u = invert_lplus(&Field::from_real(g, &even), &p)?;
        let r: Vec<f64> = lp_op.apply(&u.re()).iter().zip(&even).map(|(a, b)| a - b).collect();
        worst = worst.max(g.norm(&r) / g.norm(&even));
    }
    out.push(bound("L+ I+ residual", worst, 1e-4));
    let inv = MminusInverter::new(&p)?;
    out.push(bound("B1 B2 Wronskian drift", inv.wronskian_std, 1e-7));
    let mm = build_operator(OperatorKind::Mminus, &p, &g, None)?;
    let mut worst = 0.0f64;
    for s in &samples {
        let u = inv.apply(s)?;
        let r = mm.apply_field(&u)?;
        let diff: Vec<Complex64> = r.values.iter().zip(&s.values).map(|(a, b)| a - b).collect();
        worst = worst.max(Field::new(g, diff)?.norm() / s.norm());
    }
    out.push(bound("M- J- residual", worst, 1e-4));
    Ok(out)
}
