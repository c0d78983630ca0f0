//! Command-line front end: config resolution, orchestration and artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::evolution::{evolve, make_initial, EvolutionConfig, InitialKind};
use crate::grid::{Field, Grid};
use crate::modulation::{decompose, default_scales, stability_experiment, su_residual, Params, ProfileCache, StabilityConfig};
use crate::nonlin::{NonlinSpec, Nonlinearity};
use crate::operators::verify::verify_suite;
use crate::operators::{build_potentials, build_weights, gaussian_bumps};
use crate::soliton::SolitonProfile;
use crate::spectral::{check_h2, coercivity_probe, default_grid, resonance_probe, scan_gap, ProbeMode, System};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "solwave", version, about = "Solitary waves of the perturbed cubic NLS: profiles, spectra and dynamics")]
pub struct Cli {
    /// JSON document with the subcommand's keys; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Profile φ_ω with derivatives, Λ_ω and A_ω as CSV.
    Soliton(SolitonArgs),
    /// Operator oracle suite.
    Operators {
        #[command(subcommand)]
        action: OperatorsAction,
    },
    /// Gap scan of the L- or M-system.
    Spectrum(SpectrumArgs),
    /// (H₂) sweep.
    Hypothesis(HypothesisArgs),
    /// Split-step evolution with snapshots.
    Evolve(EvolveArgs),
    /// Perturbed-soliton decay experiment.
    Stability(StabilityArgs),
    /// Residual and coercivity probes.
    Probe {
        #[command(subcommand)]
        probe: ProbeCommand,
    },
}

#[derive(Subcommand, Debug)]
pub enum OperatorsAction {
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
pub enum ProbeCommand {
    /// (Su) residuals along a saved trajectory.
    Su(SuArgs),
    /// Weighted floor or smoothing ceiling ratios on random Gaussian samples.
    Coercivity(CoercivityArgs),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolitonArgs {
    /// Nonlinearity, e.g. `power:2`; config files may also give the JSON object form.
    #[arg(long)]
    #[serde(default, deserialize_with = "nonlin_key")]
    pub g: Option<String>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Half length; defaults to 40/√ω.
    #[arg(long = "grid-L")]
    #[serde(rename = "grid_L")]
    pub grid_l: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    /// Nonlinearity, e.g. `power:2`; config files may also give the JSON object form.
    #[arg(long)]
    #[serde(default, deserialize_with = "nonlin_key")]
    pub g: Option<String>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumArgs {
    /// Nonlinearity, e.g. `power:2`; config files may also give the JSON object form.
    #[arg(long)]
    #[serde(default, deserialize_with = "nonlin_key")]
    pub g: Option<String>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, value_enum)]
    pub system: Option<System>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Also run the band-edge resonance probe (L-system).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub edge: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisArgs {
    /// Nonlinearity, e.g. `power:2`; config files may also give the JSON object form.
    #[arg(long)]
    #[serde(default, deserialize_with = "nonlin_key")]
    pub g: Option<String>,
    #[arg(long)]
    pub omega_from: Option<f64>,
    #[arg(long)]
    pub omega_to: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitName {
    Soliton,
    Boosted,
    Perturbed,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveArgs {
    /// Nonlinearity, e.g. `power:2`; config files may also give the JSON object form.
    #[arg(long)]
    #[serde(default, deserialize_with = "nonlin_key")]
    pub g: Option<String>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, value_enum)]
    pub init: Option<InitName>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Bump width; defaults to 1/√ω.
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// L = box_factor/√ω.
    #[arg(long)]
    pub box_factor: Option<f64>,
    /// Time between snapshots.
    #[arg(long)]
    pub snapshot_every: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityArgs {
    /// Nonlinearity, e.g. `power:2`; config files may also give the JSON object form.
    #[arg(long)]
    #[serde(default, deserialize_with = "nonlin_key")]
    pub g: Option<String>,
    #[arg(long)]
    pub omega0: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub box_factor: Option<f64>,
    #[arg(long)]
    pub sample_every: Option<f64>,
    #[arg(long = "A")]
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuArgs {
    /// Directory written by `solwave evolve`.
    #[arg(long)]
    pub traj: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoercivityArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ProbeModeName>,
    /// Nonlinearity, e.g. `power:2`; config files may also give the JSON object form.
    #[arg(long)]
    #[serde(default, deserialize_with = "nonlin_key")]
    pub g: Option<String>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "A")]
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProbeModeName {
    Lemma7,
    Prop5,
}

/// Accepts `g` as a string or as a `{"family": …}` object.
fn nonlin_key<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    match Option::<Value>::deserialize(d)? {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(v @ Value::Object(_)) => Ok(Some(v.to_string())),
        Some(v) => Err(serde::de::Error::custom(format!("`g` must be a string or an object, got {v}"))),
    }
}

/// Flags override the keys of the config document; unknown keys are rejected.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let mut merged = match config {
        Some(path) => match serde_json::from_str::<Value>(&fs::read_to_string(path)?)? {
            Value::Object(m) => m,
            _ => return Err(Error::Config("config must be a JSON object".into())),
        },
        None => Map::new(),
    };
    if let Value::Object(m) = serde_json::to_value(flags)? {
        for (k, v) in m {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(e.to_string()))
}

fn need<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("`{key}` must be positive, got {v}")))
    }
}

fn nonlinearity(g: &Option<String>) -> Result<(NonlinSpec, Nonlinearity)> {
    let spec: NonlinSpec = need(g.as_deref(), "g")?.parse()?;
    Ok((spec.clone(), Nonlinearity::new(spec)?))
}

fn write_json(path: &Path, config: &impl Serialize, report: Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let doc = json!({ "version": VERSION, "config": config, "report": report });
    fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

/// CSV with a leading comment line carrying the version and resolved config.
fn write_csv(path: &Path, config: &impl Serialize, header: &[&str], rows: &[Vec<f64>], trailer: Option<String>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut body = format!("# solwave {VERSION} {}\n", serde_json::to_string(config)?);
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.17e}"))).map_err(csv_err)?;
    }
    body.push_str(&String::from_utf8(w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?).expect("csv output is UTF-8"));
    if let Some(t) = trailer {
        body.push_str(&format!("# {t}\n"));
    }
    fs::write(path, body)?;
    Ok(())
}

/// Two whitespace-separated columns for quick plotting.
fn write_dat(path: &Path, x: &[f64], y: &[f64]) -> Result<()> {
    let body: String = x.iter().zip(y).map(|(a, b)| format!("{a:.12e} {b:.12e}\n")).collect();
    fs::write(path, body)?;
    Ok(())
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("{}: {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn with_extension(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Serialize)]
struct Outcome {
    check: String,
    pass: bool,
}

fn outcome(check: &str, pass: bool) -> Outcome {
    Outcome { check: check.into(), pass }
}

/// Runs one subcommand; `Ok(false)` means some assertion of the suite failed.
pub fn run(cli: Cli) -> Result<bool> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Soliton(a) => run_soliton(resolve(&a, cfg)?),
        Command::Operators { action: OperatorsAction::Verify(a) } => run_verify(resolve(&a, cfg)?),
        Command::Spectrum(a) => run_spectrum(resolve(&a, cfg)?),
        Command::Hypothesis(a) => run_hypothesis(resolve(&a, cfg)?),
        Command::Evolve(a) => run_evolve(resolve(&a, cfg)?),
        Command::Stability(a) => run_stability(resolve(&a, cfg)?),
        Command::Probe { probe: ProbeCommand::Su(a) } => run_su(resolve(&a, cfg)?),
        Command::Probe { probe: ProbeCommand::Coercivity(a) } => run_coercivity(resolve(&a, cfg)?),
    }
}

fn run_soliton(mut a: SolitonArgs) -> Result<bool> {
    let (_, nl) = nonlinearity(&a.g)?;
    let omega = positive(need(a.omega, "omega")?, "omega")?;
    let n = *a.grid_n.get_or_insert(2048);
    let l = *a.grid_l.get_or_insert(40.0 / omega.sqrt());
    let out = a.out.get_or_insert_with(|| "profile.csv".into()).clone();
    let p = SolitonProfile::full(&nl, omega, &Grid::dirichlet(n, positive(l, "grid_L")?)?)?;
    let lam = p.lambda()?;
    let aw = p.a_omega().ok();
    let xs = p.grid.xs();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut r = vec![xs[j]];
            r.extend((0..5).map(|k| p.phi[k][j]));
            r.push(lam[j]);
            r.push(aw.map_or(f64::NAN, |v| v[j]));
            r
        })
        .collect();
    let trailer = format!("zeta={:.17e} dzeta_domega={:.17e}", p.zeta, p.dzeta_domega);
    write_csv(&out, &a, &["x", "phi", "phi1", "phi2", "phi3", "phi4", "lambda", "a_omega"], &rows, Some(trailer))?;
    write_dat(&with_extension(&out, ".dat"), &xs, &p.phi[0])?;
    Ok(true)
}

fn run_verify(mut a: VerifyArgs) -> Result<bool> {
    let (_, nl) = nonlinearity(&a.g)?;
    let omega = positive(need(a.omega, "omega")?, "omega")?;
    let n = *a.n.get_or_insert(1024);
    let seed = *a.seed.get_or_insert(7);
    let out = a.out.get_or_insert_with(|| "operators_verify.json".into()).clone();
    let checks = verify_suite(&nl, omega, n, seed)?;
    let pass = checks.iter().all(|c| c.pass);
    let failing: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.check.as_str()).collect();
    write_json(&out, &a, json!({ "checks": checks, "pass": pass, "failing": failing }))?;
    Ok(pass)
}

fn run_spectrum(mut a: SpectrumArgs) -> Result<bool> {
    let (_, nl) = nonlinearity(&a.g)?;
    let omega = positive(need(a.omega, "omega")?, "omega")?;
    let system = *a.system.get_or_insert(System::L);
    let n = *a.n.get_or_insert(1024);
    let edge = *a.edge.get_or_insert(false);
    let out = a.out.get_or_insert_with(|| "scan.json".into()).clone();
    let profile = SolitonProfile::build(&nl, omega, &default_grid(omega, n)?)?;
    let scan = scan_gap(system, &profile)?;
    let edge_report = if edge {
        if system != System::L {
            return Err(Error::Config("the edge probe applies to the L-system".into()));
        }
        Some(resonance_probe(&profile)?)
    } else {
        None
    };
    let re: Vec<f64> = scan.eigenvalues.iter().map(|e| e.re).collect();
    let im: Vec<f64> = scan.eigenvalues.iter().map(|e| e.im).collect();
    write_dat(&with_extension(&out, ".dat"), &re, &im)?;
    write_json(&out, &a, json!({ "scan": scan, "edge": edge_report }))?;
    Ok(true)
}

fn run_hypothesis(mut a: HypothesisArgs) -> Result<bool> {
    let (_, nl) = nonlinearity(&a.g)?;
    let lo = positive(*a.omega_from.get_or_insert(0.002), "omega_from")?;
    let hi = positive(*a.omega_to.get_or_insert(0.02), "omega_to")?;
    let k = *a.points.get_or_insert(6);
    let n = *a.n.get_or_insert(1024);
    let out = a.out.get_or_insert_with(|| "h2.csv".into()).clone();
    if !(lo < hi) || k < 2 {
        return Err(Error::Config("need omega_from < omega_to and at least two points".into()));
    }
    let sweep: Vec<f64> = (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect();
    let r = check_h2(&nl, &sweep, n)?;
    let rows: Vec<Vec<f64>> = r.omegas.iter().zip(&r.r).map(|(w, v)| vec![*w, *v]).collect();
    let summary = match &r.fit {
        Some(f) => format!("slope={:.6} residual={:.3e} verdict={:?} integrand_negative={}", f.slope, f.residual, r.verdict, r.integrand_negative),
        None => format!("slope=none verdict={:?} integrand_negative={}", r.verdict, r.integrand_negative),
    };
    write_csv(&out, &a, &["omega", "r"], &rows, Some(summary.to_lowercase()))?;
    write_dat(&with_extension(&out, ".dat"), &r.omegas, &r.r)?;
    Ok(true)
}

fn initial_kind(a: &EvolveArgs, omega: f64) -> Result<InitialKind> {
    Ok(match a.init.unwrap_or(InitName::Soliton) {
        InitName::Soliton => InitialKind::Soliton,
        InitName::Boosted => InitialKind::Boosted { beta: a.beta.unwrap_or(0.0), sigma: a.sigma.unwrap_or(0.0), gamma: a.gamma.unwrap_or(0.0) },
        InitName::Perturbed => InitialKind::Perturbed { delta: need(a.delta, "delta")?, width: a.width.unwrap_or(1.0 / omega.sqrt()) },
    })
}

fn evolve_grid(a: &EvolveArgs, omega: f64) -> Result<Grid> {
    Grid::periodic(a.n.unwrap_or(2048), a.box_factor.unwrap_or(60.0) / omega.sqrt())
}

fn run_evolve(mut a: EvolveArgs) -> Result<bool> {
    let (_, nl) = nonlinearity(&a.g)?;
    let omega = positive(need(a.omega, "omega")?, "omega")?;
    if *a.init.get_or_insert(InitName::Soliton) == InitName::Perturbed {
        a.width.get_or_insert(1.0 / omega.sqrt());
    }
    a.n.get_or_insert(2048);
    a.box_factor.get_or_insert(60.0);
    let dt = positive(*a.dt.get_or_insert(0.01), "dt")?;
    let t_final = positive(need(a.t_final, "T")?, "T")?;
    let every = positive(*a.snapshot_every.get_or_insert(1.0), "snapshot_every")?;
    let out = a.out.get_or_insert_with(|| "traj".into()).clone();
    let grid = evolve_grid(&a, omega)?;
    let kind = initial_kind(&a, omega)?;
    let profile = SolitonProfile::build(&nl, omega, &grid)?;
    let psi0 = make_initial(kind, &profile, &grid)?;
    let stride = (every / dt).round().max(1.0) as usize;
    let traj = evolve(&psi0, &nl, &EvolutionConfig { grid, dt, t_final, stride })?;
    fs::create_dir_all(&out)?;
    let xs = grid.xs();
    for (k, s) in traj.snapshots.iter().enumerate() {
        let rows: Vec<Vec<f64>> = (0..grid.n).map(|j| vec![xs[j], s.field.values[j].re, s.field.values[j].im]).collect();
        write_csv(&out.join(format!("snapshot_{k:05}.csv")), &json!({ "t": s.t }), &["x", "re", "im"], &rows, None)?;
    }
    let inv: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .map(|s| vec![s.t, s.invariants.mass, s.invariants.energy, s.invariants.momentum, s.seam_mass])
        .collect();
    write_csv(&out.join("invariants.csv"), &a, &["t", "mass", "energy", "momentum", "seam_mass"], &inv, None)?;
    let (dm, de, dp) = traj.drift();
    let checks = vec![
        outcome("finite field", traj.aborted.is_none()),
        outcome("mass drift <= 1e-8", dm <= 1e-8),
        outcome("energy drift <= 1e-8", de <= 1e-8),
        outcome("momentum drift <= 1e-7", dp <= 1e-7),
    ];
    let pass = checks.iter().all(|c| c.pass);
    write_json(
        &out.join("run.json"),
        &a,
        json!({ "snapshots": traj.snapshots.len(), "aborted": traj.aborted, "drift": { "mass": dm, "energy": de, "momentum": dp }, "checks": checks, "pass": pass }),
    )?;
    Ok(pass)
}

fn run_stability(mut a: StabilityArgs) -> Result<bool> {
    let (spec, _) = nonlinearity(&a.g)?;
    let omega0 = need(a.omega0, "omega0")?;
    let delta = need(a.delta, "delta")?;
    let t_final = need(a.t_final, "T")?;
    let mut cfg = StabilityConfig::new(spec, omega0, delta, t_final);
    cfg.width = a.width;
    cfg.dt = *a.dt.get_or_insert(cfg.dt);
    cfg.n = *a.n.get_or_insert(cfg.n);
    cfg.box_factor = *a.box_factor.get_or_insert(cfg.box_factor);
    cfg.sample_every = *a.sample_every.get_or_insert(cfg.sample_every);
    cfg.a = a.a;
    cfg.b = a.b;
    cfg.alpha = *a.alpha.get_or_insert(cfg.alpha);
    let out = a.out.get_or_insert_with(|| "report.json".into()).clone();
    let (report, traj) = stability_experiment(&cfg)?;
    let checks = vec![
        outcome("decomposition kept", report.truncated_at.is_none()),
        outcome("last quarter <= 0.5 first quarter", report.decays()),
        outcome("omega and beta settle", report.settles()),
        outcome("sup rho^2|u| windows decrease", report.sup_decreasing()),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let s = &report.series;
    let rows: Vec<Vec<f64>> = (0..s.t.len())
        .map(|k| {
            let v = s.virials[k];
            vec![
                s.t[k],
                s.rho2u[k],
                s.sup_rho2u[k],
                s.beta[k],
                s.sigma[k],
                s.gamma[k],
                s.omega[k],
                v.i,
                v.j_printed,
                v.j_variant,
                v.k,
                s.rho_v[k],
                s.prop5_ratio[k],
                s.orth_ratio[k],
                traj.snapshots[k].seam_mass,
            ]
        })
        .collect();
    let header = [
        "t", "rho2u", "sup_rho2u", "beta", "sigma", "gamma", "omega", "I", "J_printed", "J_variant", "K", "rho_v", "prop5_ratio", "orth_ratio", "seam_mass",
    ];
    write_csv(&with_extension(&out, "_series.csv"), &a, &header, &rows, None)?;
    write_dat(&with_extension(&out, "_rho2u.dat"), &s.t, &s.rho2u)?;
    write_json(&out, &a, json!({ "experiment": report, "checks": checks, "pass": pass }))?;
    Ok(pass)
}

#[derive(Serialize)]
struct SuRow {
    t: f64,
    residual: (f64, f64),
    coarse_residual: Option<(f64, f64)>,
    scale: (f64, f64),
    differencing_dominated: bool,
    orth_ratio: f64,
}

fn run_su(mut a: SuArgs) -> Result<bool> {
    let dir = need(a.traj.clone(), "traj")?;
    let out = a.out.get_or_insert_with(|| dir.join("su.json")).clone();
    let run: Value = serde_json::from_str(&fs::read_to_string(dir.join("run.json"))?)?;
    let ev: EvolveArgs = serde_json::from_value(run["config"].clone()).map_err(|e| Error::Config(format!("run.json: {e}")))?;
    let (_, nl) = nonlinearity(&ev.g)?;
    let omega = need(ev.omega, "omega")?;
    let grid = evolve_grid(&ev, omega)?;
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("snapshot_")))
        .collect();
    files.sort();
    let times: Vec<f64> = (0..files.len()).map(|k| k as f64 * ev.snapshot_every.unwrap_or(1.0)).collect();
    let cache = ProfileCache::new(&nl, &grid, omega);
    let mut states = Vec::new();
    let mut guess = Params::soliton(omega);
    for f in &files {
        let rows = read_csv_rows(f)?;
        if rows.len() != grid.n {
            return Err(Error::Config(format!("{} has {} rows, expected {}", f.display(), rows.len(), grid.n)));
        }
        let re: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let im: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        let st = decompose(&Field::from_parts(grid, &re, &im), &cache, guess)?;
        guess = st.params;
        states.push(st);
    }
    let (aa, bb) = default_scales(&nl, omega).unwrap_or((1200.0, 30.0));
    let rho = build_weights(omega, aa, bb, &grid)?.rho;
    let dt = ev.snapshot_every.unwrap_or(1.0);
    let mut rows = Vec::new();
    for k in 2..states.len().saturating_sub(2) {
        let r = su_residual(&states[k - 2..=k + 2], dt, &nl, &rho)?;
        rows.push(SuRow { t: times[k], residual: r.residual, coarse_residual: r.coarse_residual, scale: r.scale, differencing_dominated: r.differencing_dominated, orth_ratio: r.orth_ratio });
    }
    write_json(&out, &a, json!({ "trajectory": ev, "rows": rows }))?;
    Ok(true)
}

fn run_coercivity(mut a: CoercivityArgs) -> Result<bool> {
    let (_, nl) = nonlinearity(&a.g)?;
    let omega = positive(need(a.omega, "omega")?, "omega")?;
    let mode = *a.mode.get_or_insert(ProbeModeName::Lemma7);
    let n = *a.n.get_or_insert(1024);
    let count = *a.samples.get_or_insert(20);
    let seed = *a.seed.get_or_insert(7);
    let alpha = *a.alpha.get_or_insert(0.01);
    let (da, db) = default_scales(&nl, omega)?;
    let (aa, bb) = (*a.a.get_or_insert(da), *a.b.get_or_insert(db));
    let out = a.out.get_or_insert_with(|| "coercivity.json".into()).clone();
    let grid = default_grid(omega, n)?;
    let mut profile = SolitonProfile::build(&nl, omega, &grid)?;
    profile.build_lambda()?;
    let weights = build_weights(omega, aa, bb, &grid)?;
    let potentials = build_potentials(&profile, &weights)?;
    let samples = gaussian_bumps(&grid, omega, count, seed);
    let mode = match mode {
        ProbeModeName::Lemma7 => ProbeMode::Lemma7,
        ProbeModeName::Prop5 => ProbeMode::Prop5,
    };
    let report = coercivity_probe(mode, &profile, &weights, &potentials, alpha, &samples)?;
    let pass = report.holds;
    write_json(&out, &a, json!({ "probe": report, "pass": pass }))?;
    Ok(pass)
}

/// Binary entry point: 0 when every check passed, 1 when some failed, 2 on errors.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("SOLWAVE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(2)
        }
    }
}
