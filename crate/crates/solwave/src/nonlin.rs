//! Perturbation nonlinearities `g`, their derivatives and primitive.
//!
//! Every admitted family is a finite sum `Σ aᵢ s^{σᵢ}` with `σᵢ > 1`, so
//! `g(0) = g'(0) = 0` holds by construction and all derivatives are exact.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quad::{golden_max, linear_fit};

/// One monomial `a s^σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub a: f64,
    pub sigma: f64,
}

/// Config-level description of a nonlinearity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum NonlinSpec {
    Zero,
    Power { sigma: f64 },
    Spower { a: f64, sigma: f64 },
    Poly { terms: Vec<Term> },
}

impl NonlinSpec {
    fn terms(&self) -> Vec<Term> {
        match self {
            NonlinSpec::Zero => Vec::new(),
            NonlinSpec::Power { sigma } => vec![Term { a: 1.0, sigma: *sigma }],
            NonlinSpec::Spower { a, sigma } => vec![Term { a: *a, sigma: *sigma }],
            NonlinSpec::Poly { terms } => terms.clone(),
        }
    }
}

impl fmt::Display for NonlinSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonlinSpec::Zero => write!(f, "zero"),
            NonlinSpec::Power { sigma } => write!(f, "power:{sigma}"),
            NonlinSpec::Spower { a, sigma } => write!(f, "spower:{a},{sigma}"),
            NonlinSpec::Poly { terms } => {
                write!(f, "poly:")?;
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}@{}", t.a, t.sigma)?;
                }
                Ok(())
            }
        }
    }
}

/// Parses the compact CLI syntax (`zero`, `power:2`, `spower:-1,2`,
/// `poly:1@1.5,-0.3@2.5`) or a JSON object.
impl FromStr for NonlinSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| Error::Config(format!("nonlinearity: {e}")));
        }
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{t}' in nonlinearity '{s}'")))
        };
        match head {
            "zero" => Ok(NonlinSpec::Zero),
            "power" => Ok(NonlinSpec::Power { sigma: num(rest)? }),
            "spower" => {
                let (a, sigma) = rest
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("spower expects 'a,sigma', got '{rest}'")))?;
                Ok(NonlinSpec::Spower { a: num(a)?, sigma: num(sigma)? })
            }
            "poly" => {
                let mut terms = Vec::new();
                for item in rest.split(',') {
                    let (a, sigma) = item
                        .split_once('@')
                        .ok_or_else(|| Error::Config(format!("poly term '{item}' is not a@sigma")))?;
                    terms.push(Term { a: num(a)?, sigma: num(sigma)? });
                }
                Ok(NonlinSpec::Poly { terms })
            }
            _ => Err(Error::Config(format!("unknown nonlinearity family '{head}'"))),
        }
    }
}

/// σ(σ−1)…(σ−k+1).
fn falling(sigma: f64, k: usize) -> f64 {
    (0..k).map(|i| sigma - i as f64).product()
}

/// `c · x^e` with the conventions needed at `x = 0`.
fn mono(c: f64, x: f64, e: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else if x == 0.0 {
        if e > 0.0 {
            0.0
        } else if e == 0.0 {
            c
        } else {
            f64::INFINITY.copysign(c)
        }
    } else {
        c * x.powf(e)
    }
}

#[derive(Clone, Debug)]
pub struct Nonlinearity {
    pub spec: NonlinSpec,
    terms: Vec<Term>,
    pub s_max: f64,
    pub name: String,
}

impl Nonlinearity {
    pub fn new(spec: NonlinSpec) -> Result<Self> {
        let terms = spec.terms();
        for t in &terms {
            if !t.a.is_finite() || !t.sigma.is_finite() {
                return Err(Error::Argument("non-finite coefficient".into()));
            }
            if t.sigma <= 1.0 {
                return Err(Error::Argument(format!(
                    "exponent {} violates g(0) = g'(0) = 0 (need sigma > 1)",
                    t.sigma
                )));
            }
        }
        let name = spec.to_string();
        let mut nl = Nonlinearity { spec, terms, s_max: 1.0, name };
        nl.s_max = nl.first_critical_point().unwrap_or(1.0);
        Ok(nl)
    }

    pub fn zero() -> Self {
        Self::new(NonlinSpec::Zero).unwrap()
    }

    pub fn power(sigma: f64) -> Result<Self> {
        Self::new(NonlinSpec::Power { sigma })
    }

    pub fn signed_power(a: f64, sigma: f64) -> Result<Self> {
        Self::new(NonlinSpec::Spower { a, sigma })
    }

    pub fn with_s_max(mut self, s_max: f64) -> Self {
        self.s_max = s_max;
        self
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.a == 0.0)
    }

    /// Checked `g⁽ᵏ⁾(s)`, or `G(s)` when `primitive` is set (with `k = 0`).
    pub fn eval(&self, s: f64, k: usize, primitive: bool) -> Result<f64> {
        if !(0.0..=self.s_max).contains(&s) {
            return Err(Error::Domain(format!("s = {s} outside [0, {}]", self.s_max)));
        }
        if k > 5 {
            return Err(Error::Argument(format!("derivative order {k} > 5")));
        }
        if primitive {
            if k != 0 {
                return Err(Error::Argument("primitive is only defined for k = 0".into()));
            }
            return Ok(self.prim(s));
        }
        let v = self.d(k, s);
        if !v.is_finite() {
            return Err(Error::Singularity(format!("g^({k}) has no finite limit at s = {s}")));
        }
        Ok(v)
    }

    /// `g⁽ᵏ⁾(s)` without domain checks.
    pub fn d(&self, k: usize, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| mono(t.a * falling(t.sigma, k), s, t.sigma - k as f64))
            .sum()
    }

    pub fn g(&self, s: f64) -> f64 {
        self.d(0, s)
    }

    /// `G(s) = ∫₀ˢ g`.
    pub fn prim(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| mono(t.a / (t.sigma + 1.0), s, t.sigma + 1.0))
            .sum()
    }

    /// `p^j g⁽ᵏ⁾(p²)` summed termwise, finite whenever the combined power is.
    pub fn dw(&self, k: usize, p: f64, j: i32) -> f64 {
        self.terms
            .iter()
            .map(|t| mono(t.a * falling(t.sigma, k), p, 2.0 * (t.sigma - k as f64) + j as f64))
            .sum()
    }

    /// `p^j G(p²)` summed termwise.
    pub fn gw(&self, p: f64, j: i32) -> f64 {
        self.terms
            .iter()
            .map(|t| mono(t.a / (t.sigma + 1.0), p, 2.0 * (t.sigma + 1.0) + j as f64))
            .sum()
    }

    /// `s^m g⁽ᵏ⁾(s)` summed termwise.
    pub fn sw(&self, k: usize, s: f64, m: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| mono(t.a * falling(t.sigma, k), s, t.sigma - k as f64 + m))
            .sum()
    }

    /// `J(s) = s/2 − G(s)/s` and `J'(s) = 1/2 − g(s)/s + G(s)/s²`.
    pub fn j_curve(&self, s: f64) -> (f64, f64) {
        if s == 0.0 {
            return (0.0, 0.5);
        }
        let g_over_s = self.sw(0, s, -1.0);
        let big_g_over_s: f64 = self
            .terms
            .iter()
            .map(|t| mono(t.a / (t.sigma + 1.0), s, t.sigma))
            .sum();
        let big_g_over_s2: f64 = self
            .terms
            .iter()
            .map(|t| mono(t.a / (t.sigma + 1.0), s, t.sigma - 1.0))
            .sum();
        (0.5 * s - big_g_over_s, 0.5 - g_over_s + big_g_over_s2)
    }

    /// `J(a) − J(b)` without cancellation when `a ≈ b`; `d = a − b` is passed
    /// exactly by the caller.
    pub fn j_diff(&self, a: f64, b: f64, d: f64) -> f64 {
        // G(s)/s = Σ c s^σ, so each term needs a^σ − b^σ.
        let mut out = 0.5 * d;
        for t in &self.terms {
            let c = t.a / (t.sigma + 1.0);
            out -= c * pow_diff(a, b, d, t.sigma);
        }
        out
    }

    /// First positive zero of J', searched on a geometric lattice up to 1e4.
    pub fn first_critical_point(&self) -> Option<f64> {
        if self.is_zero() {
            return None;
        }
        let jp = |s: f64| self.j_curve(s).1;
        let mut prev = 1e-8;
        let mut prev_v = jp(prev);
        let factor: f64 = 1.02;
        let mut s = prev;
        while s < 1e4 {
            s *= factor;
            let v = jp(s);
            if v <= 0.0 && prev_v > 0.0 {
                let (mut lo, mut hi) = (prev, s);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if jp(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            prev = s;
            prev_v = v;
        }
        None
    }

    /// ε_ω and ε̃_ω over `[0, mult·ω]`.
    pub fn smallness_with(&self, omega: f64, mult: f64) -> Result<SmallnessPair> {
        if omega <= 0.0 {
            return Err(Error::Argument("omega must be positive".into()));
        }
        let top = mult * omega;
        if top > self.s_max {
            return Err(Error::Domain(format!("{mult}·ω = {top} exceeds s_max = {}", self.s_max)));
        }
        let eps = sup_abs(|s| self.sw(2, s, 1.0), top, 4096);
        let eps_tilde = sup_abs(|s| self.sw(3, s, 2.0), top, 4096);
        Ok(SmallnessPair { omega, eps, eps_tilde })
    }

    pub fn smallness(&self, omega: f64) -> Result<SmallnessPair> {
        self.smallness_with(omega, 3.0)
    }

    /// Trend report for the (H₁) limits over a decreasing ω sweep.
    pub fn check_h1(&self, omega_sweep: &[f64]) -> Result<H1Report> {
        if omega_sweep.len() < 2 {
            return Err(Error::Argument("sweep needs at least two frequencies".into()));
        }
        if omega_sweep.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Argument("sweep must be strictly decreasing".into()));
        }
        for &w in omega_sweep {
            if w <= 0.0 || 3.0 * w > self.s_max {
                return Err(Error::Domain(format!("omega {w} outside validity")));
            }
        }
        let mut orders = Vec::new();
        let mut all_ok = true;
        for k in 0..=5usize {
            let sups: Vec<f64> = omega_sweep
                .iter()
                .map(|&w| sup_abs(|s| self.sw(k, s, k as f64 - 1.0), 3.0 * w, 4096))
                .collect();
            let scale = sups.iter().cloned().fold(0.0, f64::max);
            let identically_zero = scale == 0.0;
            let decreasing = identically_zero
                || sups.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
            let slope = if sups.iter().all(|&v| v > 0.0) {
                let lx: Vec<f64> = omega_sweep.iter().map(|w| w.ln()).collect();
                let ly: Vec<f64> = sups.iter().map(|v| v.ln()).collect();
                Some(linear_fit(&lx, &ly).slope)
            } else {
                None
            };
            let toward_zero = identically_zero || slope.map_or(false, |p| p > 0.0);
            let ok = decreasing && toward_zero;
            all_ok &= ok;
            orders.push(H1Order { k, sups, slope, decreasing: ok });
        }
        let w_min = *omega_sweep.last().unwrap();
        let nontrivial = (1..=512).any(|i| self.g(3.0 * w_min * i as f64 / 512.0) != 0.0);
        Ok(H1Report { omegas: omega_sweep.to_vec(), orders, nontrivial, pass: all_ok && nontrivial })
    }
}

/// `a^σ − b^σ` given the exact difference `d = a − b`, stable for `d ≪ a`.
pub fn pow_diff(a: f64, b: f64, d: f64, sigma: f64) -> f64 {
    if b <= 0.0 || d.abs() > 0.5 * b {
        return a.powf(sigma) - b.powf(sigma);
    }
    b.powf(sigma) * (sigma * (d / b).ln_1p()).exp_m1()
}

/// Smallness quantities at one frequency.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SmallnessPair {
    pub omega: f64,
    pub eps: f64,
    pub eps_tilde: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct H1Order {
    pub k: usize,
    pub sups: Vec<f64>,
    pub slope: Option<f64>,
    pub decreasing: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct H1Report {
    pub omegas: Vec<f64>,
    pub orders: Vec<H1Order>,
    pub nontrivial: bool,
    pub pass: bool,
}

/// sup of |f| over [0, top] from uniform samples plus golden refinement.
fn sup_abs(f: impl Fn(f64) -> f64, top: f64, samples: usize) -> f64 {
    let h = top / samples as f64;
    let mut best = 0.0;
    let mut arg = 0usize;
    for i in 0..=samples {
        let v = f(i as f64 * h).abs();
        if v.is_finite() && v > best {
            best = v;
            arg = i;
        }
    }
    if best == 0.0 {
        return 0.0;
    }
    let lo = (arg.saturating_sub(1)) as f64 * h;
    let hi = ((arg + 1).min(samples)) as f64 * h;
    let (_, v) = golden_max(|s| f(s).abs(), lo, hi, 1e-14 * top.max(1e-300));
    best.max(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_compact_and_json_specs() {
        assert_eq!("power:2".parse::<NonlinSpec>().unwrap(), NonlinSpec::Power { sigma: 2.0 });
        assert_eq!(
            "spower:-1,2".parse::<NonlinSpec>().unwrap(),
            NonlinSpec::Spower { a: -1.0, sigma: 2.0 }
        );
        let j: NonlinSpec =
            r#"{"family":"poly","terms":[{"a":1.0,"sigma":1.5},{"a":-0.3,"sigma":2.5}]}"#.parse().unwrap();
        assert_eq!(j.terms().len(), 2);
        assert!(r#"{"family":"power","sigma":2,"extra":1}"#.parse::<NonlinSpec>().is_err());
        let round: NonlinSpec = j.to_string().parse().unwrap();
        assert_eq!(round, j);
    }

    #[test]
    fn rejects_linear_terms() {
        assert!(Nonlinearity::power(1.0).is_err());
        assert!(Nonlinearity::power(0.5).is_err());
    }

    #[test]
    fn power_two_values() {
        let nl = Nonlinearity::power(2.0).unwrap();
        assert!((nl.eval(0.1, 1, false).unwrap() - 0.2).abs() < 1e-15);
        assert!((nl.prim(0.3) / 0.3 - 0.03).abs() < 1e-15);
        assert_eq!(nl.eval(0.0, 0, false).unwrap(), 0.0);
        assert!((nl.s_max - 0.75).abs() < 1e-12);
    }

    #[test]
    fn singular_second_derivative_at_zero() {
        let nl = Nonlinearity::power(1.5).unwrap();
        assert!(matches!(nl.eval(0.0, 2, false), Err(Error::Singularity(_))));
        assert!(nl.eval(0.0, 1, false).is_ok());
        let nl2 = Nonlinearity::power(2.0).unwrap();
        assert_eq!(nl2.eval(0.0, 2, false).unwrap(), 2.0);
        assert_eq!(nl2.eval(0.0, 3, false).unwrap(), 0.0);
    }

    #[test]
    fn domain_checks() {
        let nl = Nonlinearity::power(2.0).unwrap();
        assert!(matches!(nl.eval(0.8, 0, false), Err(Error::Domain(_))));
        assert!(matches!(nl.smallness(0.3), Err(Error::Domain(_))));
    }

    #[test]
    fn smallness_examples() {
        let nl = Nonlinearity::power(2.0).unwrap();
        assert!((nl.smallness(0.01).unwrap().eps - 0.06).abs() < 1e-14);
        assert_eq!(Nonlinearity::zero().smallness(0.01).unwrap().eps, 0.0);
        let neg = Nonlinearity::signed_power(-1.0, 2.0).unwrap();
        let sp = neg.smallness(0.02).unwrap();
        assert!((sp.eps - 6.0 * 0.02).abs() < 1e-14);
        assert_eq!(sp.eps_tilde, 0.0);
    }

    #[test]
    fn pow_diff_matches_direct() {
        let (a, b) = (0.3_f64, 0.2_f64);
        assert!((pow_diff(a, b, a - b, 2.5) - (a.powf(2.5) - b.powf(2.5))).abs() < 1e-15);
        let b = 0.3 - 1e-12;
        let v = pow_diff(0.3, b, 1e-12, 2.0);
        assert!((v - 2.0 * 0.3 * 1e-12).abs() < 1e-24);
    }
}
