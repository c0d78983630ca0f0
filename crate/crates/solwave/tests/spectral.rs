use solwave::operators::{build_potentials, build_weights, gaussian_bumps};
use solwave::spectral::{
    check_h2, coercivity_probe, default_grid, h2_ratio, lemma7_probe, prop5_probe, resonance_probe, scan_gap, ProbeMode, System,
    Verdict, DELTA_EDGE,
};
use solwave::{Error, Field, Grid, Nonlinearity, SolitonProfile};

const OMEGA: f64 = 0.05;

fn square() -> Nonlinearity {
    Nonlinearity::power(2.0).unwrap()
}

fn focusing() -> Nonlinearity {
    Nonlinearity::signed_power(-1.0, 2.0).unwrap()
}

fn profile(nl: &Nonlinearity, omega: f64, n: usize) -> SolitonProfile {
    SolitonProfile::build(nl, omega, &default_grid(omega, n).unwrap()).unwrap()
}

fn sweep(points: usize) -> Vec<f64> {
    let (a, b) = (0.002f64, 0.02f64);
    (0..points).map(|k| a * (b / a).powf(k as f64 / (points - 1) as f64)).collect()
}

#[test]
fn h2_slope_tracks_power() {
    for sigma in [1.5, 2.0, 3.0] {
        let report = check_h2(&Nonlinearity::power(sigma).unwrap(), &sweep(6), 1024).unwrap();
        assert_eq!(report.verdict, Verdict::Diverges);
        let slope = report.fit.unwrap().slope;
        assert!((slope + (sigma - 1.0)).abs() <= 0.15, "σ = {sigma}: slope {slope}");
    }
}

#[test]
fn h2_fails_for_focusing_square() {
    let nl = focusing();
    let report = check_h2(&nl, &sweep(4), 1024).unwrap();
    assert_eq!(report.verdict, Verdict::Fails);
    assert!(report.integrand_negative);
    assert!(report.fit.is_none());

    // −3g + sg' + 4G/s = −s²/3 for g = −s².
    let p = profile(&nl, 0.01, 1024);
    let eps = nl.smallness(0.01).unwrap().eps;
    let quartic: Vec<f64> = p.phi[0].iter().map(|f| -f.powi(4) / 3.0).collect();
    let expect = p.grid.integral(&quartic) / (eps * eps * 0.01f64.sqrt());
    let (r, negative) = h2_ratio(&p).unwrap();
    assert!(negative);
    assert!((r - expect).abs() <= 1e-12 * expect.abs(), "{r} {expect}");
}

#[test]
fn h2_for_mixed_polynomial_and_zero() {
    let poly = "poly:1@1.5,1@3".parse().unwrap();
    let report = check_h2(&Nonlinearity::new(poly).unwrap(), &sweep(4), 1024).unwrap();
    assert_eq!(report.verdict, Verdict::Diverges);
    let z = profile(&Nonlinearity::zero(), 0.01, 512);
    assert!(matches!(h2_ratio(&z), Err(Error::Undefined(_))));
    assert!(matches!(check_h2(&square(), &[0.01], 512), Err(Error::Argument(_))));
}

#[test]
fn square_has_no_internal_modes() {
    let p = profile(&square(), OMEGA, 1024);
    let l = scan_gap(System::L, &p).unwrap();
    assert!(l.internal_modes.is_empty() && l.edge_flags.is_empty(), "{:?} {:?}", l.internal_modes.len(), l.edge_flags);
    assert_eq!(l.kernel_dim, 2);
    assert!(l.kernel_angle.unwrap() < 1e-4, "{:?}", l.kernel_angle);
    let m = scan_gap(System::M, &p).unwrap();
    assert!(m.internal_modes.is_empty() && m.edge_flags.is_empty());
    assert_eq!(m.kernel_dim, 0);
    assert!(m.kernel_angle.is_none());
    for scan in [&l, &m] {
        let mut plus: Vec<(f64, f64)> = scan.eigenvalues.iter().filter(|e| e.re > 0.0 || e.im > 0.0).map(|e| (e.re, e.im)).collect();
        let mut minus: Vec<(f64, f64)> = scan.eigenvalues.iter().filter(|e| e.re < 0.0 || e.im < 0.0).map(|e| (-e.re, -e.im)).collect();
        plus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        minus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(plus, minus);
        assert!(scan.lowest_continuum.0.unwrap() > OMEGA);
    }
}

#[test]
fn free_spectrum_scales_with_omega() {
    // For g = 0 the grids L = 40/√ω with fixed n are rescalings of each other.
    let scaled = |omega: f64| {
        let scan = scan_gap(System::L, &profile(&Nonlinearity::zero(), omega, 512)).unwrap();
        scan.eigenvalues.iter().filter(|e| e.re > 0.01 * omega).map(|e| e.re / omega).collect::<Vec<_>>()
    };
    let (a, b) = (scaled(0.02), scaled(0.05));
    assert_eq!(a.len(), b.len());
    let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn focusing_square_has_a_mode_at_the_edge() {
    let scan = scan_gap(System::L, &profile(&focusing(), OMEGA, 1024)).unwrap();
    assert_eq!(scan.kernel_dim, 2);
    assert!(scan.kernel_angle.unwrap() < 1e-4);
    // A localized bound state sits just below ω, inside the edge band.
    assert_eq!(scan.edge_flags.len(), 1, "{:?}", scan.refinement_deltas);
    let lam = scan.edge_flags[0];
    assert!(lam < OMEGA && lam >= OMEGA * (1.0 - DELTA_EDGE), "{lam}");
    let (_, delta) = scan.refinement_deltas.iter().find(|(l, _)| *l == lam).unwrap();
    assert!(*delta < 1e-4, "{delta}");
}

#[test]
fn resonance_probe_separates_free_and_square() {
    let free = resonance_probe(&profile(&Nonlinearity::zero(), OMEGA, 1024)).unwrap();
    assert!(free.resonance && free.cross_check_agrees, "{free:?}");
    let sq = resonance_probe(&profile(&square(), OMEGA, 1024)).unwrap();
    assert!(!sq.resonance && sq.cross_check_agrees, "{sq:?}");
}

#[test]
fn scans_reject_bad_grids() {
    let small = SolitonProfile::build(&square(), OMEGA, &Grid::dirichlet(512, 30.0 / OMEGA.sqrt()).unwrap()).unwrap();
    assert!(matches!(scan_gap(System::L, &small), Err(Error::Grid(_))));
    let periodic = SolitonProfile::build(&square(), OMEGA, &Grid::periodic(512, 40.0 / OMEGA.sqrt()).unwrap()).unwrap();
    assert!(matches!(scan_gap(System::L, &periodic), Err(Error::Grid(_))));
}

struct Setup {
    profile: SolitonProfile,
    weights: solwave::operators::WeightSet,
    potentials: solwave::operators::PotentialSet,
}

fn setup(n: usize) -> Setup {
    let grid = default_grid(OMEGA, n).unwrap();
    let mut profile = SolitonProfile::build(&square(), OMEGA, &grid).unwrap();
    profile.build_lambda().unwrap();
    let weights = build_weights(OMEGA, 1200.0, 30.0, &grid).unwrap();
    let potentials = build_potentials(&profile, &weights).unwrap();
    Setup { profile, weights, potentials }
}

#[test]
fn lemma7_floor_is_positive_and_stable() {
    let s = setup(1024);
    let g = s.profile.grid;
    let floor = |count: usize| {
        let samples = gaussian_bumps(&g, OMEGA, count, 7);
        let r = lemma7_probe(&s.profile, &s.weights, &s.potentials, &samples).unwrap();
        assert!(r.holds && r.per_c2.iter().all(|p| p.1 > 0.0), "{r:?}");
        r.bound
    };
    let (a, b) = (floor(20), floor(40));
    assert!(a / b <= 2.0 && b / a <= 2.0, "{a} {b}");

    // Bumps pushed out toward the wall.
    let k = OMEGA.sqrt();
    let far: Vec<Field> = (0..9)
        .map(|i| {
            let c = 0.1 * i as f64 * g.half_length;
            Field::from_real(g, &g.tabulate(|x| (-(k * (x - c)).powi(2)).exp()))
        })
        .collect();
    let r = lemma7_probe(&s.profile, &s.weights, &s.potentials, &far).unwrap();
    assert!(r.holds, "{r:?}");

    let zero = vec![Field::zeros(g)];
    assert!(matches!(lemma7_probe(&s.profile, &s.weights, &s.potentials, &zero), Err(Error::Argument(_))));
}

#[test]
fn prop5_ceiling_is_stable_under_refinement() {
    let ceiling = |n: usize| {
        let s = setup(n);
        let samples = gaussian_bumps(&s.profile.grid, OMEGA, 20, 11);
        let r = coercivity_probe(ProbeMode::Prop5, &s.profile, &s.weights, &s.potentials, 0.01, &samples).unwrap();
        assert!(r.holds);
        r.bound
    };
    let (a, b) = (ceiling(1024), ceiling(2048));
    assert!((a - b).abs() <= 0.05 * a, "{a} {b}");
    let s = setup(1024);
    assert!(prop5_probe(&s.profile, &s.weights, 0.01, &[]).is_err());
}
