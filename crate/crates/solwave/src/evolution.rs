//! Strang split-step integration of the NLS on a periodic grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::FourierPlan;
use crate::grid::{Boundary, Field, Grid};
use crate::nonlin::Nonlinearity;
use crate::soliton::SolitonProfile;

/// Largest |ψ| allowed at the two seam nodes of the periodic box.
pub const SEAM_TAIL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialKind {
    Soliton,
    /// e^{i(βx+γ)}φ(x − σ)
    Boosted { beta: f64, sigma: f64, gamma: f64 },
    /// φ + δ·e^{−(x/width)²}
    Perturbed { delta: f64, width: f64 },
}

/// Translates samples by `shift` with the exact Fourier shift.
pub fn spectral_shift(grid: &Grid, values: &[Complex64], shift: f64) -> Vec<Complex64> {
    let plan = FourierPlan::new(grid.n, 2.0 * grid.half_length);
    let mut buf = values.to_vec();
    let nyquist = plan.xi[grid.n / 2];
    plan.apply_complex(&mut buf, |xi| {
        if xi == nyquist {
            Complex64::new((xi * shift).cos(), 0.0)
        } else {
            Complex64::new(0.0, -xi * shift).exp()
        }
    });
    buf
}

pub fn make_initial(kind: InitialKind, profile: &SolitonProfile, grid: &Grid) -> Result<Field> {
    if grid.boundary != Boundary::Periodic {
        return Err(Error::Grid("initial data live on a periodic grid".into()));
    }
    if !profile.grid.same_nodes(grid) {
        return Err(Error::Grid("profile nodes differ from the evolution grid".into()));
    }
    let phi = &profile.phi[0];
    let seam = phi[0].abs().max(phi[grid.n - 1].abs());
    if seam > SEAM_TAIL {
        return Err(Error::Grid(format!("profile tail {seam:.2e} at the seam exceeds {SEAM_TAIL:.0e}")));
    }
    let base: Vec<Complex64> = phi.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    let values = match kind {
        InitialKind::Soliton => base,
        InitialKind::Boosted { beta, sigma, gamma } => {
            let shifted = spectral_shift(grid, &base, sigma);
            grid.xs().iter().zip(shifted).map(|(&x, v)| v * Complex64::new(0.0, beta * x + gamma).exp()).collect()
        }
        InitialKind::Perturbed { delta, width } => {
            if !(width > 0.0) {
                return Err(Error::Argument("bump width must be positive".into()));
            }
            grid.xs().iter().zip(base).map(|(&x, v)| v + delta * (-(x / width).powi(2)).exp()).collect()
        }
    };
    Field::new(*grid, values)
}

/// ‖f‖_{H¹} with the spectral derivative.
pub fn h1_norm(f: &Field) -> f64 {
    let g = &f.grid;
    let plan = FourierPlan::new(g.n, 2.0 * g.half_length);
    let d = derivative(&plan, &f.values);
    let sq: f64 = f.values.iter().zip(&d).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum();
    (g.h * sq).sqrt()
}

fn derivative(plan: &FourierPlan, v: &[Complex64]) -> Vec<Complex64> {
    let mut buf = v.to_vec();
    plan.apply_complex(&mut buf, plan.derivative_symbol(1));
    buf
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Invariants {
    pub mass: f64,
    pub energy: f64,
    pub momentum: f64,
}

/// Mass ∫|ψ|², energy ∫(|ψₓ|² − |ψ|⁴/2 + G(|ψ|²)) and momentum Im∫ψ̄ψₓ.
pub fn invariants(field: &Field, nl: &Nonlinearity) -> Invariants {
    let g = &field.grid;
    let dx: Vec<Complex64> = match g.boundary {
        Boundary::Periodic => derivative(&FourierPlan::new(g.n, 2.0 * g.half_length), &field.values),
        Boundary::Dirichlet => {
            let d = crate::operators::stencil::derivative(g.n, g.h, 1);
            let (re, im) = (d.matvec(&field.re()), d.matvec(&field.im()));
            re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()
        }
    };
    let (mut mass, mut energy, mut momentum) = (0.0, 0.0, 0.0);
    for (v, d) in field.values.iter().zip(&dx) {
        let s = v.norm_sqr();
        mass += s;
        energy += d.norm_sqr() - 0.5 * s * s + nl.prim(s);
        momentum += (v.conj() * d).im;
    }
    Invariants { mass: g.h * mass, energy: g.h * energy, momentum: g.h * momentum }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub grid: Grid,
    pub dt: f64,
    pub t_final: f64,
    /// Steps between snapshots.
    pub stride: usize,
}

impl EvolutionConfig {
    pub fn steps(&self) -> Result<usize> {
        let g = &self.grid;
        if g.boundary != Boundary::Periodic {
            return Err(Error::Grid("evolution needs a periodic grid".into()));
        }
        if !(self.dt > 0.0 && self.t_final > 0.0 && self.stride > 0) {
            return Err(Error::Argument("dt, T and the snapshot stride must be positive".into()));
        }
        let cap = g.h * g.h / std::f64::consts::PI;
        if self.dt > cap * (1.0 + 1e-12) {
            return Err(Error::Argument(format!("dt = {} exceeds h²/π = {cap:.4e}", self.dt)));
        }
        let k = self.t_final / self.dt;
        if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
            return Err(Error::Argument(format!("T/dt = {k} is not an integer")));
        }
        Ok(k.round() as usize)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub t: f64,
    #[serde(skip)]
    pub field: Field,
    pub invariants: Invariants,
    /// Fraction of the mass in the outer tenth of the box on each side.
    pub seam_mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// Set when a non-finite value stopped the run; the snapshots end at the
    /// last healthy state.
    pub aborted: Option<String>,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("a trajectory holds its initial state")
    }

    /// max |Q(t) − Q(0)|/|Q(0)| for mass and energy; momentum is measured
    /// against max(|P(0)|, mass) since it often starts at zero.
    pub fn drift(&self) -> (f64, f64, f64) {
        let first = self.snapshots[0].invariants;
        let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale;
        let mut out = (0.0f64, 0.0f64, 0.0f64);
        for s in &self.snapshots {
            let i = s.invariants;
            out.0 = out.0.max(rel(i.mass, first.mass, first.mass.abs()));
            out.1 = out.1.max(rel(i.energy, first.energy, first.energy.abs()));
            out.2 = out.2.max(rel(i.momentum, first.momentum, first.momentum.abs().max(first.mass)));
        }
        out
    }
}

fn seam_fraction(f: &Field) -> f64 {
    let g = &f.grid;
    let edge = 0.9 * g.half_length;
    let (mut outer, mut total) = (0.0, 0.0);
    for (j, v) in f.values.iter().enumerate() {
        let m = v.norm_sqr();
        total += m;
        if g.x(j).abs() > edge {
            outer += m;
        }
    }
    if total > 0.0 {
        outer / total
    } else {
        0.0
    }
}

fn snapshot(t: f64, field: Field, nl: &Nonlinearity) -> Snapshot {
    let invariants = invariants(&field, nl);
    let seam_mass = seam_fraction(&field);
    Snapshot { t, field, invariants, seam_mass }
}

pub fn evolve(psi0: &Field, nl: &Nonlinearity, cfg: &EvolutionConfig) -> Result<Trajectory> {
    let steps = cfg.steps()?;
    let g = cfg.grid;
    if !g.same_nodes(&psi0.grid) || psi0.grid.boundary != Boundary::Periodic {
        return Err(Error::Grid("initial field is not on the evolution grid".into()));
    }
    let plan = FourierPlan::new(g.n, 2.0 * g.half_length);
    let dt = cfg.dt;
    let kinetic: Vec<Complex64> = plan.xi.iter().map(|&xi| Complex64::new(0.0, -xi * xi * dt).exp()).collect();
    let half_phase = |psi: &mut [Complex64]| {
        for z in psi.iter_mut() {
            let s = z.norm_sqr();
            *z *= Complex64::new(0.0, (s - nl.g(s)) * 0.5 * dt).exp();
        }
    };
    let mut psi = psi0.values.clone();
    let mut snapshots = vec![snapshot(0.0, psi0.clone(), nl)];
    for step in 1..=steps {
        half_phase(&mut psi);
        plan.forward(&mut psi);
        psi.iter_mut().zip(&kinetic).for_each(|(z, k)| *z *= k);
        plan.inverse(&mut psi);
        half_phase(&mut psi);
        if step % cfg.stride == 0 || step == steps {
            if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Ok(Trajectory { snapshots, aborted: Some(format!("non-finite field at t = {}", step as f64 * dt)) });
            }
            snapshots.push(snapshot(step as f64 * dt, Field::new(g, psi.clone())?, nl));
        }
    }
    Ok(Trajectory { snapshots, aborted: None })
}
