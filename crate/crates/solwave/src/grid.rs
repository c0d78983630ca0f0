//! Uniform grids on [-L, L) and complex node fields.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Node 0 (x = −L) and the image node x = L carry zero.
    Dirichlet,
    Periodic,
}

/// Nodes `x_j = −L + j h`, `j = 0..n`, with `h = 2L/n`; node `n/2` is the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub half_length: f64,
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(n: usize, half_length: f64, boundary: Boundary) -> Result<Self> {
        if n < 256 || n % 2 != 0 {
            return Err(Error::Grid(format!("n = {n} must be even and at least 256")));
        }
        if boundary == Boundary::Periodic && !n.is_power_of_two() {
            return Err(Error::Grid(format!("periodic grid needs a power of two, got {n}")));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::Grid("half-length must be positive".into()));
        }
        Ok(Grid { n, h: 2.0 * half_length / n as f64, half_length, boundary })
    }

    pub fn dirichlet(n: usize, half_length: f64) -> Result<Self> {
        Self::new(n, half_length, Boundary::Dirichlet)
    }

    pub fn periodic(n: usize, half_length: f64) -> Result<Self> {
        Self::new(n, half_length, Boundary::Periodic)
    }

    /// Same nodes, other boundary convention.
    pub fn with_boundary(&self, boundary: Boundary) -> Result<Self> {
        Self::new(self.n, self.half_length, boundary)
    }

    /// Halved spacing on the same box.
    pub fn refined(&self) -> Result<Self> {
        Self::new(2 * self.n, self.half_length, self.boundary)
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.h
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn center(&self) -> usize {
        self.n / 2
    }

    pub fn same_nodes(&self, other: &Grid) -> bool {
        self.n == other.n && (self.half_length - other.half_length).abs() <= 1e-12 * self.half_length
    }

    /// Fourier wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n;
        let dk = std::f64::consts::PI / self.half_length;
        (0..n)
            .map(|k| if k <= n / 2 { k as f64 * dk } else { (k as f64 - n as f64) * dk })
            .collect()
    }

    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }

    pub fn integral(&self, a: &[f64]) -> f64 {
        self.h * a.iter().sum::<f64>()
    }

    pub fn tabulate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|j| f(self.x(j))).collect()
    }
}

/// Complex values at the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Argument(format!("field length {} != grid size {}", values.len(), grid.n)));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field { grid, values: vec![Complex64::new(0.0, 0.0); grid.n] }
    }

    pub fn from_parts(grid: Grid, re: &[f64], im: &[f64]) -> Self {
        let values = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        Field { grid, values }
    }

    pub fn from_real(grid: Grid, re: &[f64]) -> Self {
        Field { grid, values: re.iter().map(|&a| Complex64::new(a, 0.0)).collect() }
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.im).collect()
    }

    /// `Re ∫ a b̄`.
    pub fn inner(&self, other: &Field) -> f64 {
        self.grid.h * self.values.iter().zip(&other.values).map(|(a, b)| (a * b.conj()).re).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        (self.grid.h * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let g = Grid::periodic(256, 10.0).unwrap();
        assert!((g.h * g.n as f64 - 20.0).abs() < 1e-12);
        assert_eq!(g.x(g.center()), 0.0);
        assert!(Grid::periodic(300, 10.0).is_err());
        assert!(Grid::dirichlet(300, 10.0).is_ok());
        assert!(Grid::dirichlet(128, 10.0).is_err());
    }

    #[test]
    fn field_length_checked() {
        let g = Grid::dirichlet(256, 5.0).unwrap();
        assert!(Field::new(g, vec![Complex64::new(0.0, 0.0); 10]).is_err());
    }
}
