//! FFT plans and real Fourier multipliers on uniform periodic samples.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct FourierPlan {
    pub n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Angular wavenumbers in FFT order for the given period.
    pub xi: Vec<f64>,
}

impl std::fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierPlan").field("n", &self.n).finish()
    }
}

impl FourierPlan {
    pub fn new(n: usize, period: f64) -> Self {
        let mut planner = FftPlanner::new();
        let dk = 2.0 * std::f64::consts::PI / period;
        let xi = (0..n)
            .map(|k| if k <= n / 2 { k as f64 * dk } else { (k as f64 - n as f64) * dk })
            .collect();
        FourierPlan { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n), xi }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse transform including the 1/n normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    /// Applies `m(ξ)` to complex samples in place.
    pub fn apply_complex(&self, buf: &mut [Complex64], m: impl Fn(f64) -> Complex64) {
        self.forward(buf);
        for (z, &k) in buf.iter_mut().zip(&self.xi) {
            *z *= m(k);
        }
        self.inverse(buf);
    }

    /// Applies a multiplier to real samples and returns the real part.
    pub fn apply_real(&self, u: &[f64], m: impl Fn(f64) -> Complex64) -> Vec<f64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.apply_complex(&mut buf, m);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `(iξ)^k`, with the Nyquist mode dropped for odd k so real data stays real.
    pub fn derivative_symbol(&self, k: u32) -> impl Fn(f64) -> Complex64 + '_ {
        let nyquist = if self.n % 2 == 0 { Some(self.xi[self.n / 2]) } else { None };
        move |xi| {
            if k % 2 == 1 && Some(xi) == nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, xi).powu(k)
            }
        }
    }

    pub fn derivative(&self, u: &[f64], k: u32) -> Vec<f64> {
        let sym = self.derivative_symbol(k);
        self.apply_real(u, sym)
    }
}
