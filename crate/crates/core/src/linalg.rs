// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense helpers for the small (K ≤ ~10) symmetric systems that show up in
//! per-segment regressions. Matrices are row-major `Vec<f64>` of length k*k.

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Cholesky {
    k: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factorizes `a` (k×k). Returns `None` when a pivot falls below
    /// `1e-10 * trace(a) / k`.
    pub fn new(a: &[f64], k: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), k * k);
        let trace: f64 = (0..k).map(|i| a[i * k + i]).sum();
        let tol = 1e-10 * (trace / k as f64).abs();
        let mut l = vec![0.0; k * k];
        for j in 0..k {
            let mut d = a[j * k + j];
            for p in 0..j {
                d -= l[j * k + p] * l[j * k + p];
            }
            if !(d > tol) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * k + j] = djj;
            for i in (j + 1)..k {
                let mut s = a[i * k + j];
                for p in 0..j {
                    s -= l[i * k + p] * l[j * k + p];
                }
                l[i * k + j] = s / djj;
            }
        }
        Some(Self { k, l })
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn factor(&self) -> &[f64] {
        &self.l
    }

    /// ln |A|.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.k).map(|i| self.l[i * self.k + i].ln()).sum::<f64>()
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut z = b.to_vec();
        for i in 0..k {
            let mut s = z[i];
            for p in 0..i {
                s -= self.l[i * k + p] * z[p];
            }
            z[i] = s / self.l[i * k + i];
        }
        for i in (0..k).rev() {
            let mut s = z[i];
            for p in (i + 1)..k {
                s -= self.l[p * k + i] * z[p];
            }
            z[i] = s / self.l[i * k + i];
        }
        z
    }

    /// Solves Lᵀ x = z, i.e. maps a standard normal vector `z` to a draw with
    /// covariance A⁻¹.
    pub fn solve_upper(&self, z: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut x = z.to_vec();
        for i in (0..k).rev() {
            let mut s = x[i];
            for p in (i + 1)..k {
                s -= self.l[p * k + i] * x[p];
            }
            x[i] = s / self.l[i * k + i];
        }
        x
    }

    /// A⁻¹ as a dense row-major matrix.
    pub fn inverse(&self) -> Vec<f64> {
        let k = self.k;
        let mut inv = vec![0.0; k * k];
        let mut e = vec![0.0; k];
        for j in 0..k {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..k {
                inv[i * k + j] = col[i];
            }
        }
        inv
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// xᵀ A x for row-major k×k `a`.
pub fn quad_form(a: &[f64], x: &[f64]) -> f64 {
    let k = x.len();
    let mut acc = 0.0;
    for i in 0..k {
        let row = &a[i * k..(i + 1) * k];
        acc += x[i] * dot(row, x);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let ch = Cholesky::new(&a, 3).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let inv = ch.inverse();
        assert!((quad_form(&inv, &[1.0, 0.0, 0.0]) - inv[0]).abs() < 1e-15);
        // det via cofactor expansion
        let det = 4.0 * (5.0 * 3.0 - 1.0) - 2.0 * (2.0 * 3.0 - 0.6) + 0.6 * (2.0 - 5.0 * 0.6);
        assert!((ch.log_det() - f64::ln(det)).abs() < 1e-12);
    }

    #[test]
    fn rejects_singular() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(Cholesky::new(&a, 2).is_none());
    }
}
