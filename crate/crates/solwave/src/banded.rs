//! Real banded matrices: assembly algebra, products and LU solves.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Banded {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Banded { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), 0, 0);
        m.data.copy_from_slice(d);
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= self.n || j >= self.n || !self.in_band(i, j) {
            return 0.0;
        }
        self.data[i * self.width() + j + self.kl - i]
    }

    /// Adds to an entry; panics outside the band.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] += v;
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let w = self.width();
        (0..self.n)
            .map(|i| {
                let base = i * w + self.kl - i;
                self.cols(i).map(|j| self.data[base + j] * x[j]).sum()
            })
            .collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= c);
        m
    }

    pub fn add(&self, other: &Banded) -> Self {
        assert_eq!(self.n, other.n);
        let mut m = Self::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for a in [self, other] {
            for i in 0..a.n {
                for j in a.cols(i) {
                    m.add_at(i, j, a.get(i, j));
                }
            }
        }
        m
    }

    pub fn sub(&self, other: &Banded) -> Self {
        self.add(&other.scaled(-1.0))
    }

    pub fn mul(&self, other: &Banded) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut m = Self::zeros(n, (self.kl + other.kl).min(n - 1), (self.ku + other.ku).min(n - 1));
        for i in 0..n {
            for k in self.cols(i) {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in other.cols(k) {
                    m.add_at(i, j, a * other.get(k, j));
                }
            }
        }
        m
    }

    /// `diag(d) · A`.
    pub fn row_scaled(&self, d: &[f64]) -> Self {
        let mut m = self.clone();
        let w = self.width();
        for i in 0..self.n {
            for v in &mut m.data[i * w..(i + 1) * w] {
                *v *= d[i];
            }
        }
        m
    }

    /// `A · diag(d)`.
    pub fn col_scaled(&self, d: &[f64]) -> Self {
        let mut m = self.clone();
        let w = self.width();
        for i in 0..self.n {
            for j in self.cols(i) {
                m.data[i * w + j + self.kl - i] *= d[j];
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.cols(i) {
                m.add_at(j, i, self.get(i, j));
            }
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Largest |A − Aᵀ| entry relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..self.n {
            for j in self.cols(i) {
                scale = scale.max(self.get(i, j).abs());
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn lu(&self) -> Result<BandedLu> {
        BandedLu::factor(self)
    }
}

/// LU factorization with partial pivoting; the upper band widens to kl + ku.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    w: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
    pub condition_estimate: f64,
}

impl BandedLu {
    fn factor(a: &Banded) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.ku + a.kl;
        let w = kl + ku + 1;
        // Row i stores columns i − kl ..= i + ku.
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            for j in a.cols(i) {
                data[i * w + j + kl - i] = a.get(i, j);
            }
        }
        let idx = |i: usize, j: usize| i * w + j + kl - i;
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = data[idx(k, k)].abs();
            for i in k + 1..=last {
                let v = data[idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best == 0.0 {
                return Err(Error::Singular(format!("zero pivot at row {k}")));
            }
            let jmax = (k + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    data.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = data[idx(k, k)];
            for i in k + 1..=last {
                let l = data[idx(i, k)] / pivot;
                data[idx(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        data[idx(i, j)] -= l * data[idx(k, j)];
                    }
                }
            }
        }
        let diag: Vec<f64> = (0..n).map(|i| data[idx(i, i)].abs()).collect();
        let hi = diag.iter().cloned().fold(0.0, f64::max);
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(BandedLu { n, kl, w, data, piv, condition_estimate: hi / lo })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, w) = (self.n, self.kl, self.w);
        let ku = w - 1 - kl;
        let idx = |i: usize, j: usize| i * w + j + kl - i;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.data[idx(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + ku).min(n - 1) {
                s -= self.data[idx(k, j)] * x[j];
            }
            x[k] = s / self.data[idx(k, k)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Banded {
        let mut m = Banded::zeros(n, 2, 1);
        for i in 0..n {
            for j in i.saturating_sub(2)..(i + 2).min(n) {
                m.add_at(i, j, ((i * 7 + j * 3) % 11) as f64 - 5.0 + if i == j { 0.5 } else { 0.0 });
            }
        }
        m
    }

    #[test]
    fn product_matches_dense() {
        let a = sample(12);
        let b = sample(12).transpose();
        let c = a.mul(&b).to_dense();
        let d = a.to_dense() * b.to_dense();
        assert!((c - d).abs().max() < 1e-12);
    }

    #[test]
    fn lu_solves() {
        let a = sample(40);
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&x);
        let y = a.lu().unwrap().solve(&b);
        let err = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }
}
