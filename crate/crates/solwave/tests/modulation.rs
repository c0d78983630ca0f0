use num_complex::Complex64;
use proptest::prelude::*;
use solwave::evolution::{evolve, make_initial, EvolutionConfig, InitialKind};
use solwave::modulation::{
    decompose, reconstruct, stability_experiment, su_residual, transform_v, transform_v_composed, virials, ModulationState, Params,
    ProfileCache, StabilityConfig,
};
use solwave::operators::{build_potentials, build_weights, gaussian_bumps};
use solwave::spectral::default_grid;
use solwave::{Error, Field, Grid, NonlinSpec, Nonlinearity, SolitonProfile};

const OMEGA: f64 = 0.05;

fn square() -> Nonlinearity {
    Nonlinearity::power(2.0).unwrap()
}

fn box_grid(n: usize) -> Grid {
    Grid::periodic(n, 60.0 / OMEGA.sqrt()).unwrap()
}

fn sup_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn initial(kind: InitialKind, n: usize) -> (Field, ProfileCache) {
    let g = box_grid(n);
    let nl = square();
    let p = SolitonProfile::build(&nl, OMEGA, &g).unwrap();
    (make_initial(kind, &p, &g).unwrap(), ProfileCache::new(&nl, &g, OMEGA))
}

fn exact_state(grid: Grid, params: Params) -> ModulationState {
    ModulationState { params, u: Field::zeros(grid), orth: [0.0; 4], iterations: 0 }
}

#[test]
fn rotated_soliton_decomposes_to_its_phase() {
    let (phi, cache) = initial(InitialKind::Soliton, 1024);
    let rot = Complex64::new(0.0, 0.3).exp();
    let psi = Field::new(phi.grid, phi.values.iter().map(|v| v * rot).collect()).unwrap();
    let st = decompose(&psi, &cache, Params::soliton(OMEGA)).unwrap();
    let p = st.params;
    assert!((p.gamma - 0.3).abs() <= 1e-10 && p.beta.abs() <= 1e-10 && p.sigma.abs() <= 1e-10, "{p:?}");
    assert!((p.omega - OMEGA).abs() <= 1e-10 * OMEGA, "{p:?}");
    assert!(st.u.norm() <= 1e-10, "{}", st.u.norm());
}

#[test]
fn boosted_soliton_recovers_its_parameters() {
    let (beta, sigma, gamma) = (0.01, 3.0, 0.4);
    let (psi, cache) = initial(InitialKind::Boosted { beta, sigma, gamma }, 1024);
    let st = decompose(&psi, &cache, Params::soliton(OMEGA)).unwrap();
    let p = st.params;
    // e^{i(βx+γ)}φ(x − σ) = e^{i(β(x−σ) + γ + βσ)}φ(x − σ)
    assert!((p.beta - beta).abs() <= 1e-9, "{p:?}");
    assert!((p.sigma - sigma).abs() <= 1e-8, "{p:?}");
    assert!((p.gamma - (gamma + beta * sigma)).abs() <= 1e-8, "{p:?}");
    assert!((p.omega - OMEGA).abs() <= 1e-9, "{p:?}");
    assert!(st.u.norm() <= 1e-9, "{}", st.u.norm());
}

#[test]
fn perturbed_solitons_decompose_and_reconstruct() {
    for delta in [0.005, 0.01, 0.02] {
        let (psi, cache) = initial(InitialKind::Perturbed { delta, width: 1.0 / OMEGA.sqrt() }, 1024);
        let st = decompose(&psi, &cache, Params::soliton(OMEGA)).unwrap();
        assert!(st.iterations <= 10, "{}", st.iterations);
        assert!(st.orth.iter().all(|v| v.abs() <= 1e-10), "{:?}", st.orth);
        // A positive even bump raises the frequency.
        assert!(st.params.omega > OMEGA);
        let back = reconstruct(&st, &cache).unwrap();
        let err = sup_diff(&back.values, &psi.values);
        assert!(err <= 1e-12, "{err}");
    }
}

#[test]
fn far_fields_are_rejected() {
    let (phi, cache) = initial(InitialKind::Soliton, 1024);
    let zero = Field::zeros(phi.grid);
    assert!(matches!(decompose(&zero, &cache, Params::soliton(OMEGA)), Err(Error::Precondition(_))));
    let (moved, _) = initial(InitialKind::Boosted { beta: 0.0, sigma: 20.0 / OMEGA.sqrt(), gamma: 0.0 }, 1024);
    assert!(matches!(decompose(&moved, &cache, Params::soliton(OMEGA)), Err(Error::Precondition(_))));
    let dirichlet = Field::zeros(Grid::dirichlet(1024, 60.0 / OMEGA.sqrt()).unwrap());
    assert!(matches!(decompose(&dirichlet, &cache, Params::soliton(OMEGA)), Err(Error::Argument(_))));
}

#[test]
fn exact_trajectories_have_zero_su_residual() {
    let g = box_grid(1024);
    let nl = square();
    let rho = vec![1.0; g.n];
    let (dt, beta) = (0.5, 0.01);
    // ψ = e^{i(β(x − σ) + γ)}φ(x − σ) with σ = 2βt, γ = (ω + β²)t.
    let window: Vec<ModulationState> = (0..5)
        .map(|k| {
            let t = 10.0 + dt * (k as f64 - 2.0);
            exact_state(g, Params { beta, sigma: 2.0 * beta * t, gamma: (OMEGA + beta * beta) * t, omega: OMEGA })
        })
        .collect();
    let r = su_residual(&window, dt, &nl, &rho).unwrap();
    assert!(r.residual.0 <= 1e-12 && r.residual.1 <= 1e-12, "{r:?}");
    let c = r.coarse_residual.unwrap();
    assert!(c.0 <= 1e-12 && c.1 <= 1e-12, "{r:?}");
    let three = su_residual(&window[1..4], dt, &nl, &rho).unwrap();
    assert!(three.coarse_residual.is_none());
    assert!(matches!(su_residual(&window[..2], dt, &nl, &rho), Err(Error::Argument(_))));
}

#[test]
fn su_residual_is_second_order_in_the_sample_spacing() {
    let nl = square();
    let (psi0, cache) = initial(InitialKind::Perturbed { delta: 0.01, width: 1.0 / OMEGA.sqrt() }, 2048);
    let g = psi0.grid;
    let spacing = 0.25;
    let cfg = EvolutionConfig { grid: g, dt: 0.01, t_final: 11.0, stride: 25 };
    let traj = evolve(&psi0, &nl, &cfg).unwrap();
    let mut guess = Params::soliton(OMEGA);
    let states: Vec<ModulationState> = traj.snapshots[36..]
        .iter()
        .map(|s| {
            let st = decompose(&s.field, &cache, guess).unwrap();
            guess = st.params;
            st
        })
        .collect();
    assert_eq!(states.len(), 9);
    let rho = vec![1.0; g.n];
    let fine = su_residual(&states[2..7], spacing, &nl, &rho).unwrap();
    let c = fine.coarse_residual.unwrap();
    let ratio = (c.0 + c.1) / (fine.residual.0 + fine.residual.1);
    assert!(ratio >= 3.5, "{fine:?}");
    assert!(fine.differencing_dominated);
    assert!(fine.residual.0 <= 1e-3 * fine.scale.0, "{fine:?}");
}

#[test]
fn transform_v_annihilates_the_kernel_directions() {
    let nl = square();
    let v_of = |n: usize| {
        let grid = default_grid(OMEGA, n).unwrap();
        let p = SolitonProfile::build(&nl, OMEGA, &grid).unwrap();
        // u₁ = φ' lies in ker L₊, u₂ = φ in ker S².
        let u = Field::from_parts(grid, &p.phi[1], &p.phi[0]);
        let (v1, v2) = transform_v(&u, &p, 0.01).unwrap();
        (sup(&v1), sup(&v2))
    };
    let (c, f) = (v_of(1024), v_of(2048));
    assert!(c.0 / f.0 >= 3.7 && c.1 / f.1 >= 3.7, "{c:?} {f:?}");

    let grid = default_grid(OMEGA, 1024).unwrap();
    let p = SolitonProfile::build(&nl, OMEGA, &grid).unwrap();
    let (v1, v2) = transform_v(&Field::zeros(grid), &p, 0.01).unwrap();
    assert!(v1.iter().chain(&v2).all(|v| *v == 0.0));
}

#[test]
fn explicit_and_composed_transforms_converge() {
    let nl = square();
    let gap = |n: usize| {
        let grid = default_grid(OMEGA, n).unwrap();
        let p = SolitonProfile::build(&nl, OMEGA, &grid).unwrap();
        let mut worst = 0.0f64;
        for u in gaussian_bumps(&grid, OMEGA, 5, 3) {
            let (a1, a2) = transform_v(&u, &p, 0.01).unwrap();
            let (b1, b2) = transform_v_composed(&u, &p, 0.01).unwrap();
            let d: Vec<f64> = a1.iter().zip(&b1).chain(a2.iter().zip(&b2)).map(|(x, y)| x - y).collect();
            let scale = sup(&a1).max(sup(&a2));
            worst = worst.max(sup(&d) / scale);
        }
        worst
    };
    let (c, f) = (gap(1024), gap(2048));
    assert!(c / f >= 3.7, "{c} {f}");
}

struct Diagnostics {
    profile: SolitonProfile,
    weights: solwave::operators::WeightSet,
    potentials: solwave::operators::PotentialSet,
}

fn diagnostics(n: usize) -> Diagnostics {
    let grid = default_grid(OMEGA, n).unwrap();
    let mut profile = SolitonProfile::build(&square(), OMEGA, &grid).unwrap();
    profile.build_lambda().unwrap();
    let weights = build_weights(OMEGA, 1200.0, 30.0, &grid).unwrap();
    let potentials = build_potentials(&profile, &weights).unwrap();
    Diagnostics { profile, weights, potentials }
}

#[test]
fn virial_functionals_on_simple_fields() {
    let d = diagnostics(1024);
    let grid = d.profile.grid;
    let zero = Field::zeros(grid);
    let nil = vec![0.0; grid.n];
    let v = virials(&zero, (&nil, &nil), &d.weights, &d.potentials);
    assert_eq!((v.i, v.j_printed, v.j_variant, v.k), (0.0, 0.0, 0.0, 0.0));

    let u = &gaussian_bumps(&grid, OMEGA, 1, 5)[0];
    let real = Field::from_real(grid, &u.re());
    let (v1, v2) = transform_v(u, &d.profile, 0.01).unwrap();
    assert_eq!(virials(&real, (&v1, &v2), &d.weights, &d.potentials).i, 0.0);

    // ∫v₂(2Ψv₂' + Ψ'v₂) = ∫(Ψv₂²)' vanishes up to the quadrature error.
    let printed = |n: usize| {
        let d = diagnostics(n);
        let grid = d.profile.grid;
        let u = &gaussian_bumps(&grid, OMEGA, 1, 5)[0];
        let (v1, v2) = transform_v(u, &d.profile, 0.01).unwrap();
        let j = virials(u, (&v1, &v2), &d.weights, &d.potentials).j_printed;
        let size: f64 = grid.h * (0..grid.n).map(|k| d.weights.psi_ab_prime[k].abs() * v2[k] * v2[k]).sum::<f64>();
        j.abs() / size
    };
    let (c, f) = (printed(1024), printed(2048));
    assert!(c <= 1e-3 && c / f >= 3.7, "{c} {f}");
}

#[test]
fn profile_cache_is_exact_on_the_lattice() {
    let g = box_grid(1024);
    let nl = square();
    let cache = ProfileCache::new(&nl, &g, OMEGA);
    for k in [0.0, 2.0, -3.0] {
        let w = OMEGA * (1.0 + k * 1e-3);
        let direct = SolitonProfile::build(&nl, w, &g).unwrap();
        let err = sup(&cache.at(w).unwrap().phi.iter().zip(&direct.phi[0]).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(err <= 1e-15, "{err}");
    }
    let w = OMEGA * (1.0 + 1.5e-3);
    let direct = SolitonProfile::build(&nl, w, &g).unwrap();
    let err = sup(&cache.at(w).unwrap().phi.iter().zip(&direct.phi[0]).map(|(a, b)| a - b).collect::<Vec<_>>());
    assert!(err <= 1e-10, "{err}");
}

#[test]
fn boosted_run_keeps_its_velocity() {
    let nl = square();
    let beta = 0.01;
    let (psi0, cache) = initial(InitialKind::Boosted { beta, sigma: 0.0, gamma: 0.0 }, 1024);
    let traj = evolve(&psi0, &nl, &EvolutionConfig { grid: psi0.grid, dt: 0.02, t_final: 20.0, stride: 250 }).unwrap();
    let mut guess = Params::soliton(OMEGA);
    for s in &traj.snapshots {
        let st = decompose(&s.field, &cache, guess).unwrap();
        let p = st.params;
        assert!((p.beta - beta).abs() <= 1e-8, "{p:?}");
        assert!((p.sigma - 2.0 * beta * s.t).abs() <= 1e-6, "{p:?}");
        assert!((p.omega - OMEGA).abs() <= 1e-8, "{p:?}");
        guess = Params { gamma: p.gamma + p.omega * 5.0, ..p };
    }
}

#[test]
fn unperturbed_stability_run_stays_on_the_soliton() {
    let mut cfg = StabilityConfig::new(NonlinSpec::Power { sigma: 2.0 }, OMEGA, 0.0, 10.0);
    cfg.n = 1024;
    cfg.dt = 0.02;
    let (report, _) = stability_experiment(&cfg).unwrap();
    assert!(report.truncated_at.is_none());
    assert_eq!(report.series.t.len(), 21);
    // Only the splitting error separates the run from the exact soliton.
    let worst = sup(&report.series.rho2u);
    assert!(worst <= 1e-5, "{worst}");
    assert!(report.series.beta.iter().all(|b| b.abs() <= 1e-9));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn decomposition_round_trip(
        beta in -0.01f64..0.01,
        sigma in -2.0f64..2.0,
        gamma in -3.0f64..3.0,
        shift in -2i32..=2,
    ) {
        let g = box_grid(1024);
        let cache = ProfileCache::new(&square(), &g, OMEGA);
        let omega = OMEGA * (1.0 + shift as f64 * 1e-3);
        let truth = exact_state(g, Params { beta, sigma, gamma, omega });
        let psi = reconstruct(&truth, &cache).unwrap();
        let st = decompose(&psi, &cache, Params::soliton(OMEGA)).unwrap();
        let p = st.params;
        let dg = (p.gamma - gamma + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        prop_assert!((p.beta - beta).abs() <= 1e-8, "{:?}", p);
        prop_assert!((p.sigma - sigma).abs() <= 1e-7, "{:?}", p);
        prop_assert!(dg.abs() <= 1e-7, "{:?}", p);
        prop_assert!((p.omega - omega).abs() <= 1e-9, "{:?}", p);
        let back = reconstruct(&st, &cache).unwrap();
        prop_assert!(sup_diff(&back.values, &psi.values) <= 1e-12);
    }
}
