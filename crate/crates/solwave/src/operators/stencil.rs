//! Fourth-order central difference matrices on Dirichlet grids.
//!
//! Walls sit at node 0 (x = −L) and at the image node n (x = L). Values
//! beyond a wall are odd reflections, so row and column 0 vanish and the even
//! order matrices are exactly symmetric.

use crate::banded::Banded;

/// Stencil weights for offsets −3..=3 and the power of h in the denominator.
fn weights(order: u32) -> ([f64; 7], f64, i32) {
    match order {
        1 => ([0.0, 1.0, -8.0, 0.0, 8.0, -1.0, 0.0], 12.0, 1),
        2 => ([0.0, -1.0, 16.0, -30.0, 16.0, -1.0, 0.0], 12.0, 2),
        3 => ([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0], 8.0, 3),
        4 => ([-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0], 6.0, 4),
        _ => panic!("no stencil for derivative order {order}"),
    }
}

/// Banded matrix of ∂ᵏ, k = 1..=4.
pub fn derivative(n: usize, h: f64, order: u32) -> Banded {
    let (w, denom, p) = weights(order);
    let scale = 1.0 / (denom * h.powi(p));
    let half = if order <= 2 { 2 } else { 3 };
    let mut m = Banded::zeros(n, half, half);
    let ni = n as i64;
    for j in 1..n {
        for (o, &c) in w.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let idx = j as i64 + o as i64 - 3;
            let (col, sign) = if idx <= 0 {
                (-idx, -1.0)
            } else if idx >= ni {
                (2 * ni - idx, -1.0)
            } else {
                (idx, 1.0)
            };
            if col <= 0 || col >= ni {
                continue;
            }
            m.add_at(j, col as usize, sign * c * scale);
        }
    }
    m
}

/// Diagonal matrix with the wall entry zeroed.
pub fn diagonal(d: &[f64]) -> Banded {
    let mut v = d.to_vec();
    v[0] = 0.0;
    Banded::diag(&v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_on_gaussian() {
        let errs: Vec<Vec<f64>> = [512usize, 1024]
            .iter()
            .map(|&n| {
                let l = 10.0;
                let h = 2.0 * l / n as f64;
                let x: Vec<f64> = (0..n).map(|j| -l + j as f64 * h).collect();
                let u: Vec<f64> = x.iter().map(|t| (-t * t).exp()).collect();
                let exact = [
                    x.iter().map(|t| -2.0 * t * (-t * t).exp()).collect::<Vec<_>>(),
                    x.iter().map(|t| (4.0 * t * t - 2.0) * (-t * t).exp()).collect(),
                    x.iter().map(|t| (-8.0 * t.powi(3) + 12.0 * t) * (-t * t).exp()).collect(),
                    x.iter().map(|t| (16.0 * t.powi(4) - 48.0 * t * t + 12.0) * (-t * t).exp()).collect(),
                ];
                (1..=4)
                    .map(|k| {
                        let du = derivative(n, h, k).matvec(&u);
                        du.iter().zip(&exact[k as usize - 1]).skip(1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
                    })
                    .collect()
            })
            .collect();
        for k in 0..4 {
            assert!(errs[0][k] / errs[1][k] > 12.0, "order {} ratio {}", k + 1, errs[0][k] / errs[1][k]);
        }
    }

    #[test]
    fn even_orders_symmetric() {
        for k in [2, 4] {
            assert_eq!(derivative(300, 0.1, k).asymmetry(), 0.0);
        }
    }
}
