//! Discretized linear operators built on a soliton profile.
//!
//! An operator is a sum of factor chains (multiplications, derivatives and the
//! smoothing multiplier X_α). On Dirichlet grids chains without X_α are
//! assembled into one banded matrix; everything else is applied factor by
//! factor, derivatives through FFTs on periodic grids.

pub mod coeffs;
pub mod inverters;
pub mod potentials;
pub mod stencil;
pub mod verify;
pub mod weights;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::fourier::FourierPlan;
use crate::grid::{Boundary, Field, Grid};
use crate::nonlin::Nonlinearity;
use crate::quad::order;
use crate::soliton::SolitonProfile;

pub use inverters::{invert_lplus, invert_mminus, MminusInverter};
pub use potentials::{build_potentials, PotentialSet};
pub use weights::{build_weights, KWeights, WeightSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OperatorKind {
    Lplus,
    Lminus,
    Mplus,
    Mminus,
    S,
    Sstar,
    S2,
    MmS2,
    S2Lp,
    Qminus,
    Qplus,
    Xalpha,
    Yplus,
    Yminus,
    Custom,
}

impl OperatorKind {
    pub fn self_adjoint(self) -> bool {
        matches!(self, Self::Lplus | Self::Lminus | Self::Mplus | Self::Mminus | Self::Xalpha)
    }

    fn needs_alpha(self) -> bool {
        matches!(self, Self::Xalpha | Self::Yplus | Self::Yminus)
    }
}

#[derive(Clone, Debug)]
pub enum Factor {
    Diag(Vec<f64>),
    Deriv(u32),
    /// Fourier multiplier (1 + αξ²)^(−power).
    Smooth { alpha: f64, power: f64 },
}

/// Product of factors, leftmost first.
pub type Chain = Vec<Factor>;

#[derive(Clone, Debug)]
pub struct LinearOperator {
    pub kind: OperatorKind,
    pub alpha: Option<f64>,
    pub grid: Grid,
    terms: Vec<Chain>,
    banded: Option<Banded>,
    plan: Option<Arc<FourierPlan>>,
}

fn has_smooth(terms: &[Chain]) -> bool {
    terms.iter().flatten().any(|f| matches!(f, Factor::Smooth { .. }))
}

fn plan_for(grid: &Grid) -> Arc<FourierPlan> {
    match grid.boundary {
        Boundary::Periodic => Arc::new(FourierPlan::new(grid.n, 2.0 * grid.half_length)),
        Boundary::Dirichlet => Arc::new(FourierPlan::new(2 * grid.n, 4.0 * grid.half_length)),
    }
}

fn chain_matrix(grid: &Grid, chain: &Chain) -> Banded {
    let n = grid.n;
    let mut m = Banded::identity(n);
    for f in chain {
        let next = match f {
            Factor::Diag(d) => stencil::diagonal(d),
            Factor::Deriv(k) => stencil::derivative(n, grid.h, *k),
            Factor::Smooth { .. } => unreachable!("smoothing factors are never assembled"),
        };
        m = m.mul(&next);
    }
    // An empty chain is the identity; the wall row and column stay zero.
    let mut wall = vec![1.0; n];
    wall[0] = 0.0;
    m.row_scaled(&wall).col_scaled(&wall)
}

impl LinearOperator {
    pub fn from_terms(kind: OperatorKind, alpha: Option<f64>, grid: Grid, terms: Vec<Chain>) -> Self {
        let dirichlet = grid.boundary == Boundary::Dirichlet;
        let banded = if dirichlet && !has_smooth(&terms) {
            let mut acc: Option<Banded> = None;
            for t in &terms {
                let m = chain_matrix(&grid, t);
                acc = Some(match acc {
                    None => m,
                    Some(a) => a.add(&m),
                });
            }
            Some(acc.unwrap_or_else(|| Banded::zeros(grid.n, 0, 0)))
        } else {
            None
        };
        let needs_plan = !dirichlet || has_smooth(&terms);
        LinearOperator { kind, alpha, grid, terms, banded, plan: needs_plan.then(|| plan_for(&grid)) }
    }

    pub fn terms(&self) -> &[Chain] {
        &self.terms
    }

    pub fn banded(&self) -> Option<&Banded> {
        self.banded.as_ref()
    }

    fn apply_factor(&self, f: &Factor, u: Vec<f64>) -> Vec<f64> {
        let g = &self.grid;
        match (f, g.boundary) {
            (Factor::Diag(d), _) => {
                let mut v: Vec<f64> = u.iter().zip(d).map(|(a, b)| a * b).collect();
                if g.boundary == Boundary::Dirichlet {
                    v[0] = 0.0;
                }
                v
            }
            (Factor::Deriv(k), Boundary::Dirichlet) => stencil::derivative(g.n, g.h, *k).matvec(&u),
            (Factor::Deriv(k), Boundary::Periodic) => self.plan.as_ref().unwrap().derivative(&u, *k),
            (Factor::Smooth { alpha, power }, b) => {
                let plan = self.plan.as_ref().unwrap();
                let (a, p) = (*alpha, *power);
                let m = move |xi: f64| Complex64::new((1.0 + a * xi * xi).powf(-p), 0.0);
                match b {
                    Boundary::Periodic => plan.apply_real(&u, m),
                    Boundary::Dirichlet => {
                        let mut padded = vec![0.0; 2 * g.n];
                        padded[1..g.n].copy_from_slice(&u[1..]);
                        let mut out = plan.apply_real(&padded, m);
                        out.truncate(g.n);
                        out[0] = 0.0;
                        out
                    }
                }
            }
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.grid.n, "field length does not match the operator grid");
        if let Some(m) = &self.banded {
            let mut v = u.to_vec();
            v[0] = 0.0;
            return m.matvec(&v);
        }
        let mut out = vec![0.0; self.grid.n];
        for chain in &self.terms {
            let mut v = u.to_vec();
            for f in chain.iter().rev() {
                v = self.apply_factor(f, v);
            }
            out.iter_mut().zip(&v).for_each(|(o, x)| *o += x);
        }
        out
    }

    pub fn apply_field(&self, f: &Field) -> Result<Field> {
        if !self.grid.same_nodes(&f.grid) {
            return Err(Error::Argument("field grid differs from operator grid".into()));
        }
        let re = self.apply(&f.re());
        let im = self.apply(&f.im());
        Ok(Field::from_parts(f.grid, &re, &im))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &LinearOperator) -> Result<LinearOperator> {
        self.check_grid(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(a.iter().chain(b).cloned().collect());
            }
        }
        let banded = match (&self.banded, &other.banded) {
            (Some(a), Some(b)) => Some(a.mul(b)),
            _ => None,
        };
        let plan = self.plan.clone().or_else(|| other.plan.clone());
        Ok(LinearOperator { kind: OperatorKind::Custom, alpha: self.alpha.or(other.alpha), grid: self.grid, terms, banded, plan })
    }

    pub fn add(&self, other: &LinearOperator, c: f64) -> Result<LinearOperator> {
        self.check_grid(other)?;
        let mut terms = self.terms.clone();
        for t in &other.terms {
            let mut t = t.clone();
            t.insert(0, Factor::Diag(vec![c; self.grid.n]));
            terms.push(t);
        }
        let banded = match (&self.banded, &other.banded) {
            (Some(a), Some(b)) => Some(a.add(&b.scaled(c))),
            _ => None,
        };
        let plan = self.plan.clone().or_else(|| other.plan.clone());
        Ok(LinearOperator { kind: OperatorKind::Custom, alpha: self.alpha.or(other.alpha), grid: self.grid, terms, banded, plan })
    }

    fn check_grid(&self, other: &LinearOperator) -> Result<()> {
        if self.grid.same_nodes(&other.grid) && self.grid.boundary == other.grid.boundary {
            Ok(())
        } else {
            Err(Error::Argument("operators live on different grids".into()))
        }
    }

    /// Dense matrix of the operator.
    pub fn materialize(&self) -> DMatrix<f64> {
        if let Some(m) = &self.banded {
            return m.to_dense();
        }
        let n = self.grid.n;
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for k in 0..n {
            e[k] = 1.0;
            let col = self.apply(&e);
            e[k] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                out[(i, k)] = v;
            }
        }
        out
    }
}

fn constant(n: usize, c: f64) -> Factor {
    Factor::Diag(vec![c; n])
}

fn schrodinger(n: usize, v: Vec<f64>) -> Vec<Chain> {
    vec![vec![constant(n, -1.0), Factor::Deriv(2)], vec![Factor::Diag(v)]]
}

fn fourth_order(n: usize, c: coeffs::FourthOrder) -> Vec<Chain> {
    let mut terms = Vec::new();
    if c.c4 != 0.0 {
        terms.push(vec![constant(n, c.c4), Factor::Deriv(4)]);
    }
    terms.push(vec![constant(n, 2.0), Factor::Deriv(2), Factor::Diag(c.cr), Factor::Deriv(1)]);
    terms.push(vec![Factor::Deriv(1), Factor::Diag(c.b), Factor::Deriv(1)]);
    terms.push(vec![Factor::Diag(c.c), Factor::Deriv(1)]);
    terms.push(vec![Factor::Diag(c.d)]);
    terms
}

/// Derivatives 0..=4 of a node array, spectrally on a zero-padded cover.
fn spectral_derivatives(grid: &Grid, a: &[f64]) -> [Vec<f64>; 5] {
    let n = grid.n;
    let plan = FourierPlan::new(2 * n, 4.0 * grid.half_length);
    let mut padded = vec![0.0; 2 * n];
    padded[..n].copy_from_slice(a);
    let mut out: [Vec<f64>; 5] = Default::default();
    for (k, slot) in out.iter_mut().enumerate() {
        let mut d = if k == 0 { padded.clone() } else { plan.derivative(&padded, k as u32) };
        d.truncate(n);
        *slot = d;
    }
    out
}

fn potential_for(profile: &SolitonProfile, kind: OperatorKind) -> Vec<f64> {
    if kind == OperatorKind::Yplus {
        coeffs::a_plus(profile)
    } else {
        coeffs::a_minus(profile)
    }
}

/// Y_α^± through the commutator expansion
/// `X_α²[2α(a''u + 2a'u') − α²(a⁽⁴⁾u + 4a'''u' + 6a''u'' + 4a'u''')]`.
fn y_terms(grid: &Grid, a: &[f64], alpha: f64) -> Vec<Chain> {
    let [_, a1, a2, a3, a4] = spectral_derivatives(grid, a);
    let x2 = || Factor::Smooth { alpha, power: 2.0 };
    let zip = |f: &dyn Fn(usize) -> f64| (0..grid.n).map(f).collect::<Vec<f64>>();
    vec![
        vec![x2(), Factor::Diag(zip(&|j| 2.0 * alpha * a2[j] - alpha * alpha * a4[j]))],
        vec![x2(), Factor::Diag(zip(&|j| 4.0 * alpha * a1[j] - 4.0 * alpha * alpha * a3[j])), Factor::Deriv(1)],
        vec![x2(), Factor::Diag(zip(&|j| -6.0 * alpha * alpha * a2[j])), Factor::Deriv(2)],
        vec![x2(), Factor::Diag(zip(&|j| -4.0 * alpha * alpha * a1[j])), Factor::Deriv(3)],
    ]
}

/// Y_α^± from its definition `X_α²(a·X_α^{−2} − X_α^{−2}·a)`.
pub fn yalpha_direct(profile: &SolitonProfile, grid: &Grid, plus: bool, alpha: f64) -> Result<LinearOperator> {
    check_compatible(profile, grid)?;
    if !(alpha > 0.0) {
        return Err(Error::Argument("α must be positive".into()));
    }
    let kind = if plus { OperatorKind::Yplus } else { OperatorKind::Yminus };
    let a = potential_for(profile, kind);
    let terms = vec![
        vec![
            Factor::Smooth { alpha, power: 2.0 },
            Factor::Diag(a.clone()),
            Factor::Smooth { alpha, power: -2.0 },
        ],
        vec![Factor::Diag(a.iter().map(|v| -v).collect())],
    ];
    Ok(LinearOperator::from_terms(OperatorKind::Custom, Some(alpha), *grid, terms))
}

fn check_compatible(profile: &SolitonProfile, grid: &Grid) -> Result<()> {
    if profile.grid.same_nodes(grid) {
        Ok(())
    } else {
        Err(Error::Argument("profile and operator grids have different nodes".into()))
    }
}

pub fn build_operator(
    kind: OperatorKind,
    profile: &SolitonProfile,
    grid: &Grid,
    alpha: Option<f64>,
) -> Result<LinearOperator> {
    check_compatible(profile, grid)?;
    let n = grid.n;
    if kind.needs_alpha() {
        match alpha {
            Some(a) if a > 0.0 => {}
            Some(_) => return Err(Error::Argument("α must be positive".into())),
            None => return Err(Error::Argument(format!("{kind:?} needs α"))),
        }
    }
    let w = profile.omega;
    let terms = match kind {
        OperatorKind::Lplus => schrodinger(n, coeffs::v_lplus(profile)),
        OperatorKind::Lminus => schrodinger(n, coeffs::v_lminus(profile)),
        OperatorKind::Mplus => schrodinger(n, coeffs::a_plus(profile).iter().map(|a| w + a).collect()),
        OperatorKind::Mminus => schrodinger(n, coeffs::a_minus(profile).iter().map(|a| w + a).collect()),
        OperatorKind::S => vec![vec![Factor::Deriv(1)], vec![Factor::Diag(profile.ratio().iter().map(|r| -r).collect())]],
        OperatorKind::Sstar => vec![
            vec![constant(n, -1.0), Factor::Deriv(1)],
            vec![Factor::Diag(profile.ratio().iter().map(|r| -r).collect())],
        ],
        OperatorKind::S2 => vec![
            vec![Factor::Deriv(2)],
            vec![Factor::Diag(profile.ratio().iter().map(|r| -2.0 * r).collect()), Factor::Deriv(1)],
            vec![Factor::Diag(coeffs::s2_zeroth(profile))],
        ],
        OperatorKind::MmS2 => fourth_order(n, coeffs::mminus_s2(profile)),
        OperatorKind::S2Lp => fourth_order(n, coeffs::s2_lplus(profile)),
        OperatorKind::Qminus => fourth_order(n, coeffs::q_minus(profile)?),
        OperatorKind::Qplus => fourth_order(n, coeffs::q_plus(profile)?),
        OperatorKind::Xalpha => vec![vec![Factor::Smooth { alpha: alpha.unwrap(), power: 1.0 }]],
        OperatorKind::Yplus | OperatorKind::Yminus => y_terms(grid, &potential_for(profile, kind), alpha.unwrap()),
        OperatorKind::Custom => return Err(Error::Argument("custom operators are assembled with from_terms".into())),
    };
    Ok(LinearOperator::from_terms(kind, if kind.needs_alpha() { alpha } else { None }, *grid, terms))
}

/// X_α (or X_α^{1/2} when `half`) applied to a field.
pub fn apply_xalpha(field: &Field, alpha: f64, half: bool) -> Result<Field> {
    if !(alpha > 0.0) {
        return Err(Error::Argument("α must be positive".into()));
    }
    let power = if half { 0.5 } else { 1.0 };
    let op = LinearOperator::from_terms(OperatorKind::Xalpha, Some(alpha), field.grid, vec![vec![Factor::Smooth { alpha, power }]]);
    op.apply_field(field)
}

/// max over samples of ‖explicit f − (factors in sequence) f‖ / ‖f‖.
/// `factors[0]` is applied last, as in the written product.
pub fn compose_residual(explicit: &LinearOperator, factors: &[LinearOperator], samples: &[Field]) -> Result<f64> {
    for f in factors {
        explicit.check_grid(f)?;
    }
    let mut worst = 0.0f64;
    for s in samples {
        if !explicit.grid.same_nodes(&s.grid) {
            return Err(Error::Argument("sample grid differs from operator grid".into()));
        }
        let direct = explicit.apply_field(s)?;
        let mut v = s.clone();
        for f in factors.iter().rev() {
            v = f.apply_field(&v)?;
        }
        let diff: Vec<Complex64> = direct.values.iter().zip(&v.values).map(|(a, b)| a - b).collect();
        let r = Field::new(s.grid, diff)?.norm() / s.norm();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Smooth localized sample fields `(a + b t) e^{−t²}`, `t = √ω (x − c)/w`,
/// with parameters drawn from a seeded generator so that the same family can
/// be tabulated on several grids.
pub fn gaussian_bumps(grid: &Grid, omega: f64, count: usize, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = omega.sqrt();
    (0..count)
        .map(|_| {
            let c = rng.gen_range(-3.0..3.0) / k;
            let w = rng.gen_range(1.0..2.5);
            let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (ai, bi) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let t = |x: f64| k * (x - c) / w;
            let re = grid.tabulate(|x| (a + b * t(x)) * (-t(x).powi(2)).exp());
            let im = grid.tabulate(|x| (ai + bi * t(x)) * (-t(x).powi(2)).exp());
            Field::from_parts(*grid, &re, &im)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Composition {
    /// explicit S² vs S∘S
    S2,
    /// S*∘S vs L₋
    SstarS,
    /// S∘S* vs M₊
    SSstar,
    /// explicit M₋S² vs M₋∘S²
    MmS2,
    /// explicit S²L₊ vs S²∘L₊
    S2Lp,
    /// S²∘L₊∘L₋ vs M₊∘M₋∘S²
    Conjugate,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResidualStudy {
    pub coarse: f64,
    pub fine: f64,
    pub order: f64,
}

fn composition_residual(check: Composition, profile: &SolitonProfile, grid: &Grid, samples: &[Field]) -> Result<f64> {
    use OperatorKind::*;
    let op = |k| build_operator(k, profile, grid, None);
    match check {
        Composition::S2 => compose_residual(&op(S2)?, &[op(S)?, op(S)?], samples),
        Composition::SstarS => compose_residual(&op(Lminus)?, &[op(Sstar)?, op(S)?], samples),
        Composition::SSstar => compose_residual(&op(Mplus)?, &[op(S)?, op(Sstar)?], samples),
        Composition::MmS2 => compose_residual(&op(MmS2)?, &[op(Mminus)?, op(S2)?], samples),
        Composition::S2Lp => compose_residual(&op(S2Lp)?, &[op(S2)?, op(Lplus)?], samples),
        Composition::Conjugate => {
            let left = op(S2)?.compose(&op(Lplus)?)?.compose(&op(Lminus)?)?;
            compose_residual(&left, &[op(Mplus)?, op(Mminus)?, op(S2)?], samples)
        }
    }
}

/// Composition residual on `grid` and on its refinement, with the observed order.
pub fn composition_study(
    check: Composition,
    nl: &Nonlinearity,
    omega: f64,
    grid: &Grid,
    count: usize,
    seed: u64,
) -> Result<ResidualStudy> {
    let run = |g: &Grid| -> Result<f64> {
        let p = SolitonProfile::build(nl, omega, g)?;
        composition_residual(check, &p, g, &gaussian_bumps(g, omega, count, seed))
    };
    let coarse = run(grid)?;
    let fine = run(&grid.refined()?)?;
    Ok(ResidualStudy { coarse, fine, order: order(coarse, fine) })
}

/// Relative residual of `Q` against `ω(T|_{ω+δ} − T|_{ω−δ})/(2δ)` with `T` the
/// composed product (M₋∘S² for Q₋, S²∘L₊ for Q₊) and δ = 1e−3ω.
pub fn q_oracle(nl: &Nonlinearity, omega: f64, grid: &Grid, plus: bool, samples: &[Field]) -> Result<f64> {
    use OperatorKind::*;
    let d = 1e-3 * omega;
    let composed = |w: f64| -> Result<LinearOperator> {
        let p = SolitonProfile::build(nl, w, grid)?;
        let op = |k| build_operator(k, &p, grid, None);
        if plus {
            op(S2)?.compose(&op(Lplus)?)
        } else {
            op(Mminus)?.compose(&op(S2)?)
        }
    };
    let up = composed(omega + d)?;
    let dn = composed(omega - d)?;
    let p = SolitonProfile::full(nl, omega, grid)?;
    let q = build_operator(if plus { Qplus } else { Qminus }, &p, grid, None)?;
    let mut worst = 0.0f64;
    for s in samples {
        let a = q.apply(&s.re());
        let (u, v) = (up.apply(&s.re()), dn.apply(&s.re()));
        let fd: Vec<f64> = u.iter().zip(&v).map(|(x, y)| omega * (x - y) / (2.0 * d)).collect();
        let num = grid.norm(&a.iter().zip(&fd).map(|(x, y)| x - y).collect::<Vec<_>>());
        worst = worst.max(num / grid.norm(&fd));
    }
    Ok(worst)
}

/// Kernel residual ‖T f‖/‖f‖ on `grid` and on its refinement.
pub fn kernel_study(
    nl: &Nonlinearity,
    omega: f64,
    grid: &Grid,
    kind: OperatorKind,
    field: impl Fn(&SolitonProfile) -> Vec<f64>,
) -> Result<ResidualStudy> {
    let run = |g: &Grid| -> Result<f64> {
        let p = SolitonProfile::build(nl, omega, g)?;
        let f = field(&p);
        let op = build_operator(kind, &p, g, None)?;
        Ok(g.norm(&op.apply(&f)) / g.norm(&f))
    };
    let coarse = run(grid)?;
    let fine = run(&grid.refined()?)?;
    Ok(ResidualStudy { coarse, fine, order: order(coarse, fine) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_alpha_rejected() {
        let g = Grid::dirichlet(512, 120.0).unwrap();
        let p = SolitonProfile::build(&Nonlinearity::zero(), 0.05, &g).unwrap();
        assert!(matches!(build_operator(OperatorKind::Xalpha, &p, &g, None), Err(Error::Argument(_))));
        assert!(matches!(build_operator(OperatorKind::Qminus, &p, &g, None), Err(Error::Dependency(_))));
    }
}
