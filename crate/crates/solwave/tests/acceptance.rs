//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any fails.

use std::time::Instant;

use num_complex::Complex64;
use solwave::evolution::{evolve, make_initial, spectral_shift, EvolutionConfig, InitialKind};
use solwave::modulation::{decompose, default_scales, reconstruct, stability_experiment, Params, ProfileCache, StabilityConfig};
use solwave::operators::verify::verify_suite;
use solwave::operators::{build_potentials, build_weights, composition_study, gaussian_bumps, kernel_study, q_oracle, Composition};
use solwave::spectral::{check_h2, default_grid, lemma7_probe, prop5_probe, resonance_probe, scan_gap, System, Verdict};
use solwave::{Field, Grid, NonlinSpec, Nonlinearity, OperatorKind, Result, SolitonProfile};

const OMEGA: f64 = 0.05;

fn square() -> Nonlinearity {
    Nonlinearity::power(2.0).unwrap()
}

fn focusing() -> Nonlinearity {
    Nonlinearity::signed_power(-1.0, 2.0).unwrap()
}

fn sup_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

type Outcome = Result<(bool, String)>;

/// sup |φ − √(2ω)sech(√ωx)| on |x| ≤ 25/√ω ≤ 1e−8, |ζ − √(2ω)| ≤ 1e−12, under 1 s each.
fn closed_form_soliton() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for omega in [0.005f64, 0.02] {
        let start = Instant::now();
        let g = default_grid(omega, 2048)?;
        let p = SolitonProfile::build(&Nonlinearity::zero(), omega, &g)?;
        let secs = start.elapsed().as_secs_f64();
        let k = omega.sqrt();
        let err = g
            .xs()
            .iter()
            .zip(&p.phi[0])
            .filter(|(x, _)| x.abs() <= 25.0 / k)
            .map(|(&x, f)| (f - (2.0 * omega).sqrt() / (k * x).cosh()).abs())
            .fold(0.0, f64::max);
        let dz = (p.zeta - (2.0 * omega).sqrt()).abs();
        pass &= err <= 1e-8 && dz <= 1e-12 && secs < 1.0;
        notes.push(format!("ω={omega}: sup {err:.2e} (≤1e-8), ζ {dz:.1e} (≤1e-12), {secs:.2}s (<1s)"));
    }
    Ok((pass, notes.join("; ")))
}

/// Kernel residual ratios ≥ 3.7 under halving h, g ∈ {s², −s²}.
fn kernel_residuals() -> Outcome {
    let g = default_grid(OMEGA, 1024)?;
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, nl) in [("s²", square()), ("−s²", focusing())] {
        let lm = kernel_study(&nl, OMEGA, &g, OperatorKind::Lminus, |p| p.phi[0].clone())?;
        let lp = kernel_study(&nl, OMEGA, &g, OperatorKind::Lplus, |p| p.phi[1].clone())?;
        let (a, b) = (lm.coarse / lm.fine, lp.coarse / lp.fine);
        pass &= a >= 3.7 && b >= 3.7;
        notes.push(format!("{name}: L₋φ ×{a:.2}, L₊φ' ×{b:.2}"));
    }
    Ok((pass, format!("{} (≥3.7)", notes.join("; "))))
}

/// Conjugate identity and explicit expansions converge at order ≥ 2 on 20 fields.
fn conjugate_identity() -> Outcome {
    let g = default_grid(OMEGA, 1024)?;
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, c) in [("S²L₊L₋ = M₊M₋S²", Composition::Conjugate), ("M₋S²", Composition::MmS2), ("S²L₊", Composition::S2Lp)] {
        let st = composition_study(c, &square(), OMEGA, &g, 20, 7)?;
        pass &= st.order >= 2.0;
        notes.push(format!("{name} order {:.2}", st.order));
    }
    Ok((pass, format!("{} (≥2)", notes.join("; "))))
}

/// Explicit Q± against centered ω-differences ≤ 1e−3 relative.
fn q_operators() -> Outcome {
    let g = default_grid(OMEGA, 1024)?;
    let samples = gaussian_bumps(&g, OMEGA, 10, 3);
    let qm = q_oracle(&square(), OMEGA, &g, false, &samples)?;
    let qp = q_oracle(&square(), OMEGA, &g, true, &samples)?;
    Ok((qm <= 1e-3 && qp <= 1e-3, format!("Q₋ {qm:.2e}, Q₊ {qp:.2e} (≤1e-3)")))
}

/// Gap scans at n = 1024, L = 40/√ω and the edge probe for g = 0, under 5 min.
fn spectral_classification() -> Outcome {
    let start = Instant::now();
    let build = |nl: &Nonlinearity| SolitonProfile::build(nl, OMEGA, &default_grid(OMEGA, 1024)?);
    let sq = build(&square())?;
    let l = scan_gap(System::L, &sq)?;
    let m = scan_gap(System::M, &sq)?;
    let angle = l.kernel_angle.unwrap_or(f64::INFINITY);
    let square_ok = l.internal_modes.is_empty() && m.internal_modes.is_empty() && l.kernel_dim == 2 && angle < 1e-4;
    let foc = scan_gap(System::L, &build(&focusing())?)?;
    let focusing_ok = !foc.internal_modes.is_empty();
    let free = resonance_probe(&build(&Nonlinearity::zero())?)?;
    let secs = start.elapsed().as_secs_f64();
    let pass = square_ok && focusing_ok && free.resonance && secs < 300.0;
    let edge: Vec<String> = foc.edge_flags.iter().map(|l| format!("{:.6}ω", l / OMEGA)).collect();
    Ok((
        pass,
        format!(
            "s²: modes L {} M {}, kernel dim {} angle {angle:.1e}; −s²: {} internal modes, edge-flagged [{}]; g=0: det {:.1e} resonance {}; {secs:.0}s",
            l.internal_modes.len(),
            m.internal_modes.len(),
            l.kernel_dim,
            foc.internal_modes.len(),
            edge.join(", "),
            free.determinant,
            free.resonance
        ),
    ))
}

/// (H₂) slopes −(σ−1) ± 0.15 over [0.002, 0.02]; g = −s² fails with a negative integrand.
fn hypothesis_h2() -> Outcome {
    let sweep: Vec<f64> = (0..6).map(|k| 0.002 * 10f64.powf(k as f64 / 5.0)).collect();
    let mut pass = true;
    let mut notes = Vec::new();
    for sigma in [1.5, 2.0, 3.0] {
        let r = check_h2(&Nonlinearity::power(sigma)?, &sweep, 1024)?;
        let slope = r.fit.map_or(f64::NAN, |f| f.slope);
        pass &= (slope + (sigma - 1.0)).abs() <= 0.15;
        notes.push(format!("σ={sigma}: {slope:.3}"));
    }
    let f = check_h2(&focusing(), &sweep, 1024)?;
    pass &= f.verdict == Verdict::Fails && f.integrand_negative;
    notes.push(format!("−s²: {:?}, integrand negative {}", f.verdict, f.integrand_negative));
    Ok((pass, notes.join("; ")))
}

/// Inverter residuals ≤ 1e−4, Λ to 1e−6, Wronskian drift ≤ 1e−7.
fn inverters() -> Outcome {
    let checks = verify_suite(&square(), OMEGA, 1024, 7)?;
    let names = ["I+[-omega phi] vs Lambda", "L+ I+ residual", "B1 B2 Wronskian drift", "M- J- residual"];
    let picked: Vec<_> = checks.iter().filter(|c| names.contains(&c.check.as_str())).collect();
    let pass = picked.len() == names.len() && picked.iter().all(|c| c.pass);
    let notes: Vec<String> = picked.iter().map(|c| format!("{} {:.1e}", c.check, c.residual)).collect();
    Ok((pass, notes.join("; ")))
}

/// Phase rotation ≤ 1e−6 at t = 10, drift ≤ 1e−8 over T = 200, Galilean covariance ≤ 1e−6.
fn evolution_fidelity() -> Outcome {
    let nl = square();
    let g = Grid::periodic(2048, 60.0 / OMEGA.sqrt())?;
    let p = SolitonProfile::build(&nl, OMEGA, &g)?;
    let run = |psi0: &Field, t: f64| -> Result<Field> {
        Ok(evolve(psi0, &nl, &EvolutionConfig { grid: g, dt: 0.01, t_final: t, stride: usize::MAX })?.last().field.clone())
    };
    let phi = make_initial(InitialKind::Soliton, &p, &g)?;
    let rot = Complex64::new(0.0, OMEGA * 10.0).exp();
    let phase = sup_diff(&run(&phi, 10.0)?.values, &phi.values.iter().map(|v| v * rot).collect::<Vec<_>>());

    let pert = make_initial(InitialKind::Perturbed { delta: 0.01, width: 1.0 / OMEGA.sqrt() }, &p, &g)?;
    let traj = evolve(&pert, &nl, &EvolutionConfig { grid: g, dt: 0.01, t_final: 200.0, stride: 100 })?;
    let (dm, de, _) = traj.drift();

    let (beta, sigma, gamma, t) = (0.1, 2.0, 0.3, 5.0);
    let boosted = run(&make_initial(InitialKind::Boosted { beta, sigma, gamma }, &p, &g)?, t)?;
    let moved = spectral_shift(&g, &run(&phi, t)?.values, 2.0 * beta * t + sigma);
    let expect: Vec<Complex64> =
        g.xs().iter().zip(moved).map(|(&x, v)| v * Complex64::new(0.0, beta * x - beta * beta * t + gamma).exp()).collect();
    let gal = sup_diff(&boosted.values, &expect);
    let pass = phase <= 1e-6 && dm <= 1e-8 && de <= 1e-8 && gal <= 1e-6;
    Ok((pass, format!("phase {phase:.1e} (≤1e-6), mass {dm:.1e} energy {de:.1e} (≤1e-8), Galilean {gal:.1e} (≤1e-6)")))
}

/// Orthogonality ≤ 1e−10 in ≤ 10 Newton steps for δ ≤ 0.02, reconstruction to 1e−12.
fn modulation() -> Outcome {
    let nl = square();
    let g = Grid::periodic(2048, 60.0 / OMEGA.sqrt())?;
    let p = SolitonProfile::build(&nl, OMEGA, &g)?;
    let cache = ProfileCache::new(&nl, &g, OMEGA);
    let mut pass = true;
    let mut notes = Vec::new();
    for delta in [0.0, 0.005, 0.01, 0.02] {
        let psi = make_initial(InitialKind::Perturbed { delta, width: 1.0 / OMEGA.sqrt() }, &p, &g)?;
        let st = decompose(&psi, &cache, Params::soliton(OMEGA))?;
        let orth = st.orth.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rec = sup_diff(&reconstruct(&st, &cache)?.values, &psi.values);
        pass &= orth <= 1e-10 && st.iterations <= 10 && rec <= 1e-12;
        notes.push(format!("δ={delta}: {} it, orth {orth:.1e}, rec {rec:.1e}", st.iterations));
    }
    Ok((pass, notes.join("; ")))
}

/// g = s², ω₀ = 0.05, δ = 0.01, T = 400: decay, settling of ω and β, decreasing sup, under 15 min.
fn stability_trend() -> Outcome {
    let start = Instant::now();
    let cfg = StabilityConfig::new(NonlinSpec::Power { sigma: 2.0 }, OMEGA, 0.01, 400.0);
    let (r, _) = stability_experiment(&cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let pass = r.truncated_at.is_none() && r.decays() && r.settles() && r.sup_decreasing() && secs < 900.0;
    let sup: Vec<String> = r.sup_windows.iter().map(|v| format!("{v:.2e}")).collect();
    Ok((
        pass,
        format!(
            "‖ρ²u‖² quarters {:.2e} → {:.2e} (ratio {:.2}, ≤0.5); ω inc {:.2e} vs drift {:.2e} ({:.0}%, ≤10%); β inc {:.1e} vs drift {:.1e}; sup windows [{}]; {secs:.0}s",
            r.first_quarter,
            r.last_quarter,
            r.last_quarter / r.first_quarter,
            r.omega_increment,
            r.omega_drift,
            100.0 * r.omega_increment / r.omega_drift,
            r.beta_increment,
            r.beta_drift,
            sup.join(", ")
        ),
    ))
}

/// Weighted floor positive and within 2× under sample doubling; smoothing ceiling finite and
/// within 10% under resolution doubling.
fn coercivity() -> Outcome {
    let nl = square();
    let (a, b) = default_scales(&nl, OMEGA)?;
    let setup = |n: usize| -> Result<_> {
        let g = default_grid(OMEGA, n)?;
        let mut p = SolitonProfile::build(&nl, OMEGA, &g)?;
        p.build_lambda()?;
        let w = build_weights(OMEGA, a, b, &g)?;
        let pot = build_potentials(&p, &w)?;
        Ok((g, p, w, pot))
    };
    let (g, p, w, pot) = setup(1024)?;
    let f20 = lemma7_probe(&p, &w, &pot, &gaussian_bumps(&g, OMEGA, 20, 7))?.bound;
    let f40 = lemma7_probe(&p, &w, &pot, &gaussian_bumps(&g, OMEGA, 40, 7))?.bound;
    let c1 = prop5_probe(&p, &w, 0.01, &gaussian_bumps(&g, OMEGA, 20, 11))?.bound;
    let (g2, p2, w2, _) = setup(2048)?;
    let c2 = prop5_probe(&p2, &w2, 0.01, &gaussian_bumps(&g2, OMEGA, 20, 11))?.bound;
    let lemma = f20 > 0.0 && f40 > 0.0 && f20 / f40 <= 2.0 && f40 / f20 <= 2.0;
    let prop = c1.is_finite() && c2.is_finite() && (c1 - c2).abs() <= 0.1 * c1;
    Ok((lemma && prop, format!("floor {f20:.3} / {f40:.3} (20/40 samples); ceiling {c1:.4} / {c2:.4} (n=1024/2048)")))
}

/// ∫P_∞ = ∫(a⁺ + a⁻)/2 to 1e−8 relative.
fn quadrature_identity() -> Outcome {
    let nl = square();
    let mut pass = true;
    let mut notes = Vec::new();
    for omega in [0.01f64, 0.05] {
        let g = default_grid(omega, 2048)?;
        let p = SolitonProfile::build(&nl, omega, &g)?;
        let (a, b) = default_scales(&nl, omega)?;
        let pot = build_potentials(&p, &build_weights(omega, a, b, &g)?)?;
        let lhs = g.integral(&pot.p_inf);
        let rhs = 0.5 * g.integral(&pot.a_plus.iter().zip(&pot.a_minus).map(|(x, y)| x + y).collect::<Vec<_>>());
        let rel = ((lhs - rhs) / rhs).abs();
        pass &= rel <= 1e-8;
        notes.push(format!("ω={omega}: {rel:.1e}"));
    }
    Ok((pass, format!("{} (≤1e-8)", notes.join("; "))))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("closed-form soliton", closed_form_soliton),
        ("kernel residuals", kernel_residuals),
        ("conjugate identity", conjugate_identity),
        ("Q± oracle", q_operators),
        ("spectral classification", spectral_classification),
        ("hypothesis H2", hypothesis_h2),
        ("inverter residuals", inverters),
        ("evolution fidelity", evolution_fidelity),
        ("modulation", modulation),
        ("asymptotic-stability trend", stability_trend),
        ("coercivity surrogates", coercivity),
        ("quadrature identity", quadrature_identity),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!("{} {:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" }, k + 1);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
