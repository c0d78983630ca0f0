//! Modulated-soliton decomposition, the (Su) residual, the transformed field
//! v, the virial functionals and the asymptotic-stability experiment.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve, h1_norm, make_initial, spectral_shift, EvolutionConfig, InitialKind, Trajectory};
use crate::fourier::FourierPlan;
use crate::grid::{Boundary, Field, Grid};
use crate::nonlin::{NonlinSpec, Nonlinearity};
use crate::operators::{build_operator, build_potentials, build_weights, Factor, LinearOperator, OperatorKind, PotentialSet, WeightSet};
use crate::quad::golden_max;
use crate::soliton::SolitonProfile;
use crate::spectral::{check_h2, Verdict};

const NEWTON_LIMIT: usize = 25;
const ORTH_TOL: f64 = 1e-10;
/// Roundoff floor of the orthogonality test relative to ‖φ‖².
const ORTH_FLOOR: f64 = 1e-13;

/// Modulation parameters (β, σ, γ, ω).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub beta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub omega: f64,
}

impl Params {
    pub fn soliton(omega: f64) -> Self {
        Params { beta: 0.0, sigma: 0.0, gamma: 0.0, omega }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulationState {
    pub params: Params,
    #[serde(skip)]
    pub u: Field,
    /// (⟨u, φ⟩, ⟨u, xφ⟩, ⟨u, iΛ⟩, ⟨u, iφ'⟩) at convergence.
    pub orth: [f64; 4],
    pub iterations: usize,
}

/// φ, φ' and Λ at one frequency.
#[derive(Clone, Debug)]
pub struct ProfileArrays {
    pub omega: f64,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Profiles on a lattice ω₀(1 + k·10⁻³), interpolated cubically in ω.
pub struct ProfileCache {
    pub nl: Nonlinearity,
    pub grid: Grid,
    pub omega0: f64,
    spacing: f64,
    entries: Mutex<HashMap<i64, Arc<ProfileArrays>>>,
}

impl ProfileCache {
    pub fn new(nl: &Nonlinearity, grid: &Grid, omega0: f64) -> Self {
        ProfileCache { nl: nl.clone(), grid: *grid, omega0, spacing: 1e-3 * omega0, entries: Mutex::new(HashMap::new()) }
    }

    fn node(&self, k: i64) -> Result<Arc<ProfileArrays>> {
        if let Some(p) = self.entries.lock().unwrap().get(&k) {
            return Ok(p.clone());
        }
        let omega = self.omega0 + k as f64 * self.spacing;
        if omega <= 0.0 {
            return Err(Error::Decomposition(format!("frequency iterate {omega} is not positive")));
        }
        let mut p = SolitonProfile::build(&self.nl, omega, &self.grid)?;
        p.build_lambda()?;
        let arrays = Arc::new(ProfileArrays {
            omega,
            phi: p.phi[0].clone(),
            dphi: p.phi[1].clone(),
            lambda: p.lambda()?.to_vec(),
        });
        self.entries.lock().unwrap().insert(k, arrays.clone());
        Ok(arrays)
    }

    pub fn at(&self, omega: f64) -> Result<ProfileArrays> {
        let s = (omega - self.omega0) / self.spacing;
        let k0 = s.floor() as i64;
        let t = s - k0 as f64;
        let nodes = [-1.0, 0.0, 1.0, 2.0];
        let weights: Vec<f64> = (0..4)
            .map(|i| (0..4).filter(|&j| j != i).map(|j| (t - nodes[j]) / (nodes[i] - nodes[j])).product())
            .collect();
        let mut out = ProfileArrays { omega, phi: vec![0.0; self.grid.n], dphi: vec![0.0; self.grid.n], lambda: vec![0.0; self.grid.n] };
        for (i, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let p = self.node(k0 - 1 + i as i64)?;
            for j in 0..self.grid.n {
                out.phi[j] += w * p.phi[j];
                out.dphi[j] += w * p.dphi[j];
                out.lambda[j] += w * p.lambda[j];
            }
        }
        Ok(out)
    }
}

fn plan(grid: &Grid) -> FourierPlan {
    FourierPlan::new(grid.n, 2.0 * grid.half_length)
}

fn complex_derivative(plan: &FourierPlan, v: &[Complex64]) -> Vec<Complex64> {
    let mut buf = v.to_vec();
    plan.apply_complex(&mut buf, plan.derivative_symbol(1));
    buf
}

/// e^{−i(βx+γ)} ψ(x + σ).
fn frame(psi: &Field, p: &Params) -> Vec<Complex64> {
    let g = &psi.grid;
    let shifted = spectral_shift(g, &psi.values, -p.sigma);
    g.xs().iter().zip(shifted).map(|(&x, v)| v * Complex64::new(0.0, -(p.beta * x + p.gamma)).exp()).collect()
}

fn conditions(grid: &Grid, u: &[Complex64], prof: &ProfileArrays) -> [f64; 4] {
    let xs = grid.xs();
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..grid.n {
        a += u[j].re * prof.phi[j];
        b += u[j].re * xs[j] * prof.phi[j];
        c += u[j].im * prof.lambda[j];
        d += u[j].im * prof.dphi[j];
    }
    [a * grid.h, b * grid.h, c * grid.h, d * grid.h]
}

fn orth_scale(grid: &Grid, u: &[Complex64], prof: &ProfileArrays) -> (f64, f64) {
    let un = (grid.h * u.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
    (un, grid.norm(&prof.phi))
}

/// inf over (γ, σ) of ‖e^{−iβx}ψ − e^{iγ}φ(· − σ)‖_{H¹}, σ searched within
/// 3/√ω of the guess, with the minimizing σ and the phase γ of the frame.
fn gate_distance(psi: &Field, guess: &Params, prof: &ProfileArrays) -> (f64, f64, f64) {
    let g = &psi.grid;
    let pl = plan(g);
    let w: Vec<Complex64> = g.xs().iter().zip(&psi.values).map(|(&x, v)| v * Complex64::new(0.0, -guess.beta * x).exp()).collect();
    let dw = complex_derivative(&pl, &w);
    let base: Vec<Complex64> = prof.phi.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    let overlap = |sigma: f64| -> Complex64 {
        let s = spectral_shift(g, &base, sigma);
        let ds = complex_derivative(&pl, &s);
        let z: Complex64 = (0..g.n).map(|j| s[j].conj() * w[j] + ds[j].conj() * dw[j]).sum();
        z * g.h
    };
    let r = 3.0 / guess.omega.sqrt();
    let (sigma, best) = golden_max(|s| overlap(s).norm(), guess.sigma - r, guess.sigma + r, 1e-6 * r);
    // e^{−iβx}ψ ≈ e^{i(γ − βσ)}φ(x − σ)
    let gamma = overlap(sigma).arg() + guess.beta * sigma;
    let wn = h1_norm(&Field { grid: *g, values: w });
    let pn = h1_norm(&Field { grid: *g, values: base });
    ((wn * wn + pn * pn - 2.0 * best).max(0.0).sqrt(), sigma, gamma)
}

/// Finds (β, σ, γ, ω) with ψ(y) = e^{i(β(y−σ)+γ)}[φ_ω + u](y − σ) and u
/// orthogonal to φ, xφ, iΛ, iφ'.
pub fn decompose(psi: &Field, cache: &ProfileCache, guess: Params) -> Result<ModulationState> {
    let grid = cache.grid;
    if !grid.same_nodes(&psi.grid) || psi.grid.boundary != Boundary::Periodic {
        return Err(Error::Argument("field is not on the cache's periodic grid".into()));
    }
    let prof = cache.at(guess.omega)?;
    let gate = 0.1 * h1_norm(&Field::from_real(grid, &prof.phi));
    let (dist, sigma0, gamma0) = gate_distance(psi, &guess, &prof);
    if dist > gate {
        return Err(Error::Precondition(format!("field is {dist:.3e} away from the soliton manifold (gate {gate:.3e})")));
    }
    // Newton starts from the best-overlap frame; γ keeps the branch of the guess.
    let turns = ((guess.gamma - gamma0) / std::f64::consts::TAU).round();
    let guess = Params { sigma: sigma0, gamma: gamma0 + turns * std::f64::consts::TAU, ..guess };
    let pl = plan(&grid);
    let xs = grid.xs();
    let eval = |p: &Params| -> Result<(Vec<Complex64>, Vec<Complex64>, ProfileArrays, [f64; 4])> {
        let prof = cache.at(p.omega)?;
        let w = frame(psi, p);
        let u: Vec<Complex64> = w.iter().zip(&prof.phi).map(|(v, f)| v - f).collect();
        let f = conditions(&grid, &u, &prof);
        Ok((w, u, prof, f))
    };
    let mut p = guess;
    for it in 0..=NEWTON_LIMIT {
        let (w, u, prof, f) = eval(&p)?;
        let (un, pn) = orth_scale(&grid, &u, &prof);
        let size: f64 = f.iter().map(|v| v.abs()).sum();
        if size <= ORTH_TOL * un * pn || size <= ORTH_FLOOR * pn * pn {
            return Ok(ModulationState { params: p, u: Field::new(grid, u)?, orth: f, iterations: it });
        }
        if it == NEWTON_LIMIT {
            break;
        }
        let dw = complex_derivative(&pl, &w);
        let col_b: Vec<Complex64> = (0..grid.n).map(|j| Complex64::new(0.0, -xs[j]) * w[j]).collect();
        let col_s: Vec<Complex64> = (0..grid.n).map(|j| dw[j] + Complex64::new(0.0, p.beta) * w[j]).collect();
        let col_g: Vec<Complex64> = w.iter().map(|v| Complex64::new(0.0, -1.0) * v).collect();
        let d = 1e-6 * p.omega;
        let (_, _, _, fp) = eval(&Params { omega: p.omega + d, ..p })?;
        let (_, _, _, fm) = eval(&Params { omega: p.omega - d, ..p })?;
        let cb = conditions(&grid, &col_b, &prof);
        let cs = conditions(&grid, &col_s, &prof);
        let cg = conditions(&grid, &col_g, &prof);
        let jac = Matrix4::from_fn(|r, c| match c {
            0 => cb[r],
            1 => cs[r],
            2 => cg[r],
            _ => (fp[r] - fm[r]) / (2.0 * d),
        });
        let step = jac
            .lu()
            .solve(&(-Vector4::from(f)))
            .ok_or_else(|| Error::Decomposition("singular modulation Jacobian".into()))?;
        p = Params { beta: p.beta + step[0], sigma: p.sigma + step[1], gamma: p.gamma + step[2], omega: p.omega + step[3] };
        if !(p.omega > 0.0) || !p.sigma.is_finite() {
            return Err(Error::Decomposition(format!("Newton left the admissible set at iteration {it}")));
        }
    }
    Err(Error::Decomposition(format!("Newton did not converge in {NEWTON_LIMIT} iterations")))
}

/// ψ rebuilt from a decomposed state.
pub fn reconstruct(state: &ModulationState, cache: &ProfileCache) -> Result<Field> {
    let p = state.params;
    let prof = cache.at(p.omega)?;
    let grid = cache.grid;
    let w: Vec<Complex64> = grid
        .xs()
        .iter()
        .enumerate()
        .map(|(j, &x)| (state.u.values[j] + prof.phi[j]) * Complex64::new(0.0, p.beta * x + p.gamma).exp())
        .collect();
    Field::new(grid, spectral_shift(&grid, &w, p.sigma))
}

/// Projects the real part off {φ, xφ} and the imaginary part off {Λ, φ'}.
pub fn project_orthogonal(f: &Field, profile: &SolitonProfile) -> Result<Field> {
    let grid = &profile.grid;
    let xphi: Vec<f64> = grid.xs().iter().zip(&profile.phi[0]).map(|(x, p)| x * p).collect();
    let project = |mut v: Vec<f64>, basis: [&[f64]; 2]| -> Vec<f64> {
        let mut ortho: Vec<Vec<f64>> = Vec::new();
        for b in basis {
            let mut e = b.to_vec();
            for o in &ortho {
                let c = grid.dot(&e, o);
                e.iter_mut().zip(o).for_each(|(a, b)| *a -= c * b);
            }
            let n = grid.norm(&e);
            e.iter_mut().for_each(|a| *a /= n);
            ortho.push(e);
        }
        for o in &ortho {
            let c = grid.dot(&v, o);
            v.iter_mut().zip(o).for_each(|(a, b)| *a -= c * b);
        }
        v
    };
    let re = project(f.re(), [&profile.phi[0], &xphi]);
    let im = project(f.im(), [profile.lambda()?, &profile.phi[1]]);
    Ok(Field::from_parts(f.grid, &re, &im))
}

/// The explicit operators behind v, built once per profile.
pub struct VTransform {
    x2: LinearOperator,
    mm_s2: LinearOperator,
    s2_lp: LinearOperator,
}

impl VTransform {
    pub fn new(profile: &SolitonProfile, alpha: f64) -> Result<Self> {
        let grid = &profile.grid;
        Ok(VTransform {
            x2: x_squared(grid, alpha),
            mm_s2: build_operator(OperatorKind::MmS2, profile, grid, None)?,
            s2_lp: build_operator(OperatorKind::S2Lp, profile, grid, None)?,
        })
    }

    pub fn apply(&self, u: &Field) -> (Vec<f64>, Vec<f64>) {
        let v1 = self.x2.apply(&self.mm_s2.apply(&u.im()));
        let v2 = self.x2.apply(&self.s2_lp.apply(&u.re())).iter().map(|v| -v).collect();
        (v1, v2)
    }
}

fn x_squared(grid: &Grid, alpha: f64) -> LinearOperator {
    LinearOperator::from_terms(OperatorKind::Custom, Some(alpha), *grid, vec![vec![Factor::Smooth { alpha, power: 2.0 }]])
}

/// v₁ = X_α²M₋S²u₂, v₂ = −X_α²S²L₊u₁ through the explicit fourth-order operators.
pub fn transform_v(u: &Field, profile: &SolitonProfile, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(VTransform::new(profile, alpha)?.apply(u))
}

/// The same transform through the composed factors M₋∘S² and S²∘L₊.
pub fn transform_v_composed(u: &Field, profile: &SolitonProfile, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = &profile.grid;
    let op = |k| build_operator(k, profile, grid, None);
    let x2 = x_squared(grid, alpha);
    let s2 = op(OperatorKind::S2)?;
    let v1 = x2.apply(&op(OperatorKind::Mminus)?.apply(&s2.apply(&u.im())));
    let v2: Vec<f64> = x2.apply(&s2.apply(&op(OperatorKind::Lplus)?.apply(&u.re()))).iter().map(|v| -v).collect();
    Ok((v1, v2))
}

fn real_derivative(grid: &Grid, v: &[f64]) -> Vec<f64> {
    match grid.boundary {
        Boundary::Periodic => plan(grid).derivative(v, 1),
        Boundary::Dirichlet => crate::operators::stencil::derivative(grid.n, grid.h, 1).matvec(v),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Virials {
    pub i: f64,
    /// ∫v₂(2Ψ∂ₓv₂ + Ψ'v₂) as printed.
    pub j_printed: f64,
    /// ∫v₁(2Ψ∂ₓv₂ + Ψ'v₂).
    pub j_variant: f64,
    pub k: f64,
}

pub fn virials(u: &Field, v: (&[f64], &[f64]), weights: &WeightSet, potentials: &PotentialSet) -> Virials {
    let grid = &u.grid;
    let (u1, u2) = (u.re(), u.im());
    let du2 = real_derivative(grid, &u2);
    let (v1, v2) = v;
    let dv2 = real_derivative(grid, v2);
    let pa = &weights.a.phi;
    let n = grid.n;
    let i: f64 = (0..n).map(|j| u1[j] * (2.0 * pa[j] * du2[j] + weights.a.zeta[j].powi(2) * u2[j])).sum();
    let (psi, dpsi) = (&weights.psi_ab, &weights.psi_ab_prime);
    let jp: f64 = (0..n).map(|j| v2[j] * (2.0 * psi[j] * dv2[j] + dpsi[j] * v2[j])).sum();
    let jv: f64 = (0..n).map(|j| v1[j] * (2.0 * psi[j] * dv2[j] + dpsi[j] * v2[j])).sum();
    let k: f64 = (0..n)
        .map(|j| {
            let s = weights.a.chi[j] * weights.b.zeta[j];
            -(s * v1[j]) * (s * v2[j]) * potentials.r_b[j]
        })
        .sum();
    Virials { i: i * grid.h, j_printed: jp * grid.h, j_variant: jv * grid.h, k: k * grid.h }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuReport {
    pub dt: f64,
    /// ‖residual‖ of the u₁ and u₂ equations at spacing dt.
    pub residual: (f64, f64),
    /// ‖∂ₜu₁‖ + ‖L₋u₂‖ and ‖∂ₜu₂‖ + ‖L₊u₁‖, the scale of each equation.
    pub scale: (f64, f64),
    /// Residuals at spacing 2dt when five states are given.
    pub coarse_residual: Option<(f64, f64)>,
    /// Halving the spacing still changes the residual by more than 2×.
    pub differencing_dominated: bool,
    /// (|β̇|/√ω + |ω̇|/ω + √ω|σ̇ − 2β| + |γ̇ − ω − β²|)/(√ω‖ρ²u‖²)
    pub orth_ratio: f64,
}

/// h(r) = |r|²r − g(|r|²)r.
fn h_of(nl: &Nonlinearity, r: Complex64) -> Complex64 {
    let s = r.norm_sqr();
    r * (s - nl.g(s))
}

fn su_at(prev: &ModulationState, mid: &ModulationState, next: &ModulationState, dt: f64, nl: &Nonlinearity) -> Result<((f64, f64), (f64, f64), [f64; 4])> {
    let grid = mid.u.grid;
    let p = mid.params;
    let omega = p.omega;
    let mut profile = SolitonProfile::build(nl, omega, &grid)?;
    profile.build_lambda()?;
    let lp = build_operator(OperatorKind::Lplus, &profile, &grid, None)?;
    let lm = build_operator(OperatorKind::Lminus, &profile, &grid, None)?;
    let rate = |a: f64, b: f64| (b - a) / (2.0 * dt);
    let bd = rate(prev.params.beta, next.params.beta);
    let sd = rate(prev.params.sigma, next.params.sigma);
    let gd = rate(prev.params.gamma, next.params.gamma);
    let wd = rate(prev.params.omega, next.params.omega);
    let (u1, u2) = (mid.u.re(), mid.u.im());
    let du1 = real_derivative(&grid, &u1);
    let du2 = real_derivative(&grid, &u2);
    let xs = grid.xs();
    let phi = &profile.phi[0];
    let dphi = &profile.phi[1];
    let lam = profile.lambda()?;
    let shift = gd - omega - p.beta * p.beta;
    let drift = sd - 2.0 * p.beta;
    let lu1 = lp.apply(&u1);
    let lu2 = lm.apply(&u2);
    let mut r1 = vec![0.0; grid.n];
    let mut r2 = vec![0.0; grid.n];
    let mut dt1 = vec![0.0; grid.n];
    let mut dt2 = vec![0.0; grid.n];
    for j in 0..grid.n {
        let th1 = bd * xs[j] * phi[j] + shift * phi[j] - p.beta * drift * phi[j];
        let th2 = -wd / omega * lam[j] + drift * dphi[j];
        let m1 = bd * xs[j] * u1[j] + shift * u1[j] - drift * du2[j] - p.beta * drift * u1[j];
        let m2 = bd * xs[j] * u2[j] + shift * u2[j] + drift * du1[j] - p.beta * drift * u2[j];
        let f = phi[j];
        let s = f * f;
        let hu = h_of(nl, Complex64::new(f, 0.0) + mid.u.values[j]);
        let hphi = f * (s - nl.g(s));
        let dh = 3.0 * s - nl.g(s) - 2.0 * s * nl.d(1, s);
        let q1 = hu.re - hphi - dh * u1[j];
        let q2 = hu.im - (s - nl.g(s)) * u2[j];
        dt1[j] = rate(prev.u.values[j].re, next.u.values[j].re);
        dt2[j] = rate(prev.u.values[j].im, next.u.values[j].im);
        r1[j] = dt1[j] - (lu2[j] + th2 + m2 - q2);
        r2[j] = dt2[j] - (-lu1[j] - th1 - m1 + q1);
    }
    let scale = (grid.norm(&dt1) + grid.norm(&lu2), grid.norm(&dt2) + grid.norm(&lu1));
    Ok(((grid.norm(&r1), grid.norm(&r2)), scale, [bd, sd, gd, wd]))
}

/// (Su) residual at the center of 3 or 5 consecutive states `dt` apart.
pub fn su_residual(window: &[ModulationState], dt: f64, nl: &Nonlinearity, rho: &[f64]) -> Result<SuReport> {
    let (fine, coarse) = match window.len() {
        3 => (su_at(&window[0], &window[1], &window[2], dt, nl)?, None),
        5 => (su_at(&window[1], &window[2], &window[3], dt, nl)?, Some(su_at(&window[0], &window[2], &window[4], 2.0 * dt, nl)?)),
        k => return Err(Error::Argument(format!("su_residual needs 3 or 5 states, got {k}"))),
    };
    let mid = &window[window.len() / 2];
    let ((r, scale, [bd, sd, gd, wd]), coarse) = (fine, coarse);
    let p = mid.params;
    let w = p.omega;
    let grid = mid.u.grid;
    let rho2u: f64 = grid.h * mid.u.values.iter().zip(rho).map(|(z, r)| r.powi(4) * z.norm_sqr()).sum::<f64>();
    let num = bd.abs() / w.sqrt() + wd.abs() / w + w.sqrt() * (sd - 2.0 * p.beta).abs() + (gd - w - p.beta * p.beta).abs();
    let orth_ratio = if rho2u > 0.0 { num / (w.sqrt() * rho2u) } else if num == 0.0 { 0.0 } else { f64::INFINITY };
    let coarse_residual = coarse.map(|c| c.0);
    let differencing_dominated = coarse_residual.map_or(false, |c| c.0 + c.1 > 2.0 * (r.0 + r.1));
    Ok(SuReport { dt, residual: r, scale, coarse_residual, differencing_dominated, orth_ratio })
}

/// Diagnostic weights: B = ⌈2/(ε√ω₀)⌉ capped at 1000, A = 40B.
pub fn default_scales(nl: &Nonlinearity, omega0: f64) -> Result<(f64, f64)> {
    let eps = nl.smallness(omega0)?.eps;
    if eps == 0.0 {
        return Err(Error::Undefined("ε_ω₀ = 0".into()));
    }
    let b = (2.0 / (eps * omega0.sqrt())).ceil().min(1000.0);
    Ok((40.0 * b, b))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub g: NonlinSpec,
    pub omega0: f64,
    pub delta: f64,
    /// Bump width; defaults to 1/√ω₀.
    pub width: Option<f64>,
    pub t_final: f64,
    pub dt: f64,
    pub n: usize,
    /// L = box_factor/√ω₀.
    pub box_factor: f64,
    /// Time between diagnostic snapshots.
    pub sample_every: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub alpha: f64,
}

impl StabilityConfig {
    pub fn new(g: NonlinSpec, omega0: f64, delta: f64, t_final: f64) -> Self {
        StabilityConfig { g, omega0, delta, width: None, t_final, dt: 0.01, n: 2048, box_factor: 60.0, sample_every: 0.5, a: None, b: None, alpha: 0.01 }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DiagnosticsSeries {
    pub t: Vec<f64>,
    pub rho2u: Vec<f64>,
    pub sup_rho2u: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub gamma: Vec<f64>,
    pub omega: Vec<f64>,
    pub virials: Vec<Virials>,
    pub rho_v: Vec<f64>,
    pub prop5_ratio: Vec<f64>,
    pub orth_ratio: Vec<f64>,
    pub orth_residual: Vec<f64>,
    /// ‖η_A∂ₓu‖² + A⁻²‖η_Au‖²
    pub prop3_density: Vec<f64>,
    pub iterations: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub config: StabilityConfig,
    pub a: f64,
    pub b: f64,
    pub weights_truncated: bool,
    pub exploratory: bool,
    /// Set when decomposition failed; the series stop there.
    pub truncated_at: Option<(f64, String)>,
    pub mass_drift: f64,
    pub energy_drift: f64,
    /// Averages of ‖ρ²u‖² over the first and last quarter of the horizon.
    pub first_quarter: f64,
    pub last_quarter: f64,
    pub omega_increment: f64,
    pub omega_drift: f64,
    pub beta_increment: f64,
    pub beta_drift: f64,
    /// Total variation of ω and β over [0, T/2], reported next to the net drift.
    pub omega_variation: f64,
    pub beta_variation: f64,
    /// Averages of sup ρ²|u| over four equal windows.
    pub sup_windows: Vec<f64>,
    /// Fitted constant C with ∫₀ᵗ prop3_density ≤ C(ε + ω₀∫₀ᵗ‖ρ²u‖²), at T/2 and T.
    pub prop3_constant: (f64, f64),
    pub prop5_max: f64,
    pub orth_ratio_max: f64,
    pub series: DiagnosticsSeries,
}

impl StabilityReport {
    pub fn decays(&self) -> bool {
        self.last_quarter <= 0.5 * self.first_quarter
    }

    /// Cauchy increments over [T/2, T] within 10% of the drift over [0, T/2];
    /// series that stay at roundoff level (drift below 1e−9) pass.
    pub fn settles(&self) -> bool {
        let ok = |inc: f64, drift: f64| inc <= 0.1 * drift || (drift < 1e-9 && inc < 1e-9);
        ok(self.omega_increment, self.omega_drift) && ok(self.beta_increment, self.beta_drift)
    }

    pub fn sup_decreasing(&self) -> bool {
        self.sup_windows.windows(2).all(|w| w[1] <= w[0])
    }
}

fn average(t: &[f64], v: &[f64], lo: f64, hi: f64) -> f64 {
    let sel: Vec<f64> = t.iter().zip(v).filter(|(s, _)| **s >= lo - 1e-9 && **s <= hi + 1e-9).map(|(_, x)| *x).collect();
    sel.iter().sum::<f64>() / sel.len().max(1) as f64
}

fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2).zip(v.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

/// Evolves a perturbed soliton, decomposes every sample and assembles the diagnostics.
pub fn stability_experiment(cfg: &StabilityConfig) -> Result<(StabilityReport, Trajectory)> {
    if !(cfg.omega0 > 0.0 && cfg.t_final > 0.0 && cfg.dt > 0.0 && cfg.sample_every > 0.0 && cfg.alpha > 0.0 && cfg.box_factor > 0.0) {
        return Err(Error::Config("stability parameters must be positive".into()));
    }
    let nl = Nonlinearity::new(cfg.g.clone())?;
    let w0 = cfg.omega0;
    let grid = Grid::periodic(cfg.n, cfg.box_factor / w0.sqrt())?;
    let (da, db) = default_scales(&nl, w0)?;
    let (a, b) = (cfg.a.unwrap_or(da), cfg.b.unwrap_or(db));
    let sweep = [w0 / 10.0, w0 / 4.0, w0 / 2.0, w0];
    let h1 = nl.check_h1(&sweep.iter().rev().cloned().collect::<Vec<_>>()).map(|r| r.pass).unwrap_or(false);
    let h2 = check_h2(&nl, &sweep, 1024).map(|r| r.verdict == Verdict::Diverges).unwrap_or(false);

    let mut profile = SolitonProfile::build(&nl, w0, &grid)?;
    profile.build_lambda()?;
    let weights = build_weights(w0, a, b, &grid)?;
    let potentials = build_potentials(&profile, &weights)?;
    let width = cfg.width.unwrap_or(1.0 / w0.sqrt());
    let psi0 = make_initial(InitialKind::Perturbed { delta: cfg.delta, width }, &profile, &grid)?;
    let stride = (cfg.sample_every / cfg.dt).round() as usize;
    let traj = evolve(&psi0, &nl, &EvolutionConfig { grid, dt: cfg.dt, t_final: cfg.t_final, stride: stride.max(1) })?;
    let (mass_drift, energy_drift, _) = traj.drift();

    let cache = ProfileCache::new(&nl, &grid, w0);
    let vt = VTransform::new(&profile, cfg.alpha)?;
    let mut series = DiagnosticsSeries::default();
    let mut states: Vec<ModulationState> = Vec::new();
    let mut truncated_at = traj.aborted.as_ref().map(|m| (traj.last().t, m.clone()));
    let eta = &weights.a.eta;
    let rho = &weights.rho;
    for snap in &traj.snapshots {
        let guess = match states.as_slice() {
            [] => Params::soliton(w0),
            [.., p] => {
                let q = p.params;
                Params { gamma: q.gamma + q.omega * cfg.sample_every, ..q }
            }
        };
        let state = match decompose(&snap.field, &cache, guess) {
            Ok(s) => s,
            Err(e) => {
                truncated_at = Some((snap.t, e.to_string()));
                break;
            }
        };
        let u = &state.u;
        let (v1, v2) = vt.apply(u);
        let vir = virials(u, (&v1, &v2), &weights, &potentials);
        let h = grid.h;
        let rho2u: f64 = h * u.values.iter().zip(rho).map(|(z, r)| r.powi(4) * z.norm_sqr()).sum::<f64>();
        let sup = u.values.iter().zip(rho).map(|(z, r)| r * r * z.norm()).fold(0.0, f64::max);
        let rho_v: f64 = (h * (0..grid.n).map(|j| rho[j].powi(2) * (v1[j].powi(2) + v2[j].powi(2))).sum::<f64>()).sqrt();
        let du = {
            let pl = plan(&grid);
            complex_derivative(&pl, &u.values)
        };
        let p3 = h * (0..grid.n).map(|j| eta[j].powi(2) * (du[j].norm_sqr() + u.values[j].norm_sqr() / (a * a))).sum::<f64>();
        series.t.push(snap.t);
        series.rho2u.push(rho2u.sqrt());
        series.sup_rho2u.push(sup);
        series.beta.push(state.params.beta);
        series.sigma.push(state.params.sigma);
        series.gamma.push(state.params.gamma);
        series.omega.push(state.params.omega);
        series.virials.push(vir);
        series.rho_v.push(rho_v);
        series.prop5_ratio.push(if rho_v > 0.0 { w0 * w0 * rho2u.sqrt() / rho_v } else { 0.0 });
        series.orth_residual.push(state.orth.iter().map(|v| v.abs()).fold(0.0, f64::max));
        series.prop3_density.push(p3);
        series.iterations.push(state.iterations);
        states.push(state);
    }
    if states.is_empty() {
        let cause = truncated_at.map_or_else(String::new, |(_, c)| c);
        return Err(Error::Decomposition(format!("initial state could not be decomposed: {cause}")));
    }
    // (orth) ratio by central differences of the tracked parameters.
    let m = states.len();
    series.orth_ratio = vec![f64::NAN; m];
    for k in 1..m.saturating_sub(1) {
        let (pv, c, nx) = (&states[k - 1].params, &states[k].params, &states[k + 1].params);
        let d = series.t[k + 1] - series.t[k - 1];
        let (bd, sd, gd, wd) = ((nx.beta - pv.beta) / d, (nx.sigma - pv.sigma) / d, (nx.gamma - pv.gamma) / d, (nx.omega - pv.omega) / d);
        let w = c.omega;
        let num = bd.abs() / w.sqrt() + wd.abs() / w + w.sqrt() * (sd - 2.0 * c.beta).abs() + (gd - w - c.beta * c.beta).abs();
        let den = w.sqrt() * series.rho2u[k].powi(2);
        series.orth_ratio[k] = if den > 0.0 { num / den } else { 0.0 };
    }

    let t = &series.t;
    let horizon = t.last().copied().unwrap_or(0.0);
    let sq: Vec<f64> = series.rho2u.iter().map(|v| v * v).collect();
    let first_quarter = average(t, &sq, 0.0, 0.25 * horizon);
    let last_quarter = average(t, &sq, 0.75 * horizon, horizon);
    let at = |v: &[f64], time: f64| -> f64 {
        let k = t.iter().position(|s| *s >= time - 1e-9).unwrap_or(t.len() - 1);
        v[k]
    };
    let (om, be) = (&series.omega, &series.beta);
    let omega_increment = (at(om, horizon) - at(om, 0.5 * horizon)).abs();
    let omega_drift = (at(om, 0.5 * horizon) - at(om, 0.0)).abs();
    let beta_increment = (at(be, horizon) - at(be, 0.5 * horizon)).abs();
    let beta_drift = (at(be, 0.5 * horizon) - at(be, 0.0)).abs();
    let variation = |v: &[f64]| -> f64 {
        let k = t.iter().position(|s| *s >= 0.5 * horizon - 1e-9).unwrap_or(t.len() - 1);
        v[..=k].windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    };
    let (omega_variation, beta_variation) = (variation(om), variation(be));
    let sup_windows = (0..4).map(|q| average(t, &series.sup_rho2u, q as f64 * horizon / 4.0, (q + 1) as f64 * horizon / 4.0)).collect();
    let eps_orbit = states.iter().map(|s| h1_norm(&s.u) + s.params.beta.abs() + (s.params.omega - w0).abs()).fold(0.0, f64::max);
    let prop3_at = |end: f64| -> f64 {
        let k = t.iter().position(|s| *s >= end - 1e-9).unwrap_or(t.len() - 1) + 1;
        let lhs = trapezoid(&t[..k], &series.prop3_density[..k]);
        let rhs = eps_orbit + w0 * trapezoid(&t[..k], &sq[..k]);
        if rhs > 0.0 {
            lhs / rhs
        } else {
            0.0
        }
    };
    let prop3_constant = if t.len() > 1 { (prop3_at(0.5 * horizon), prop3_at(horizon)) } else { (0.0, 0.0) };
    let report = StabilityReport {
        config: cfg.clone(),
        a,
        b,
        weights_truncated: weights.truncated,
        exploratory: !(h1 && h2),
        truncated_at,
        mass_drift,
        energy_drift,
        first_quarter,
        last_quarter,
        omega_increment,
        omega_drift,
        beta_increment,
        beta_drift,
        omega_variation,
        beta_variation,
        sup_windows,
        prop3_constant,
        prop5_max: series.prop5_ratio.iter().cloned().fold(0.0, f64::max),
        orth_ratio_max: series.orth_ratio.iter().filter(|v| v.is_finite()).cloned().fold(0.0, f64::max),
        series,
    };
    Ok((report, traj))
}
