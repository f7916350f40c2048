//! Small dense linear algebra: square complex matrices for the per-bin
//! demixing updates and a real Cholesky solver for the evaluation
//! projections.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::math;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), n * n, "CMatrix::from_rows needs n*n entries");
        Self { n, data }
    }

    pub fn from_real(n: usize, data: &[f64]) -> Self {
        Self::from_rows(n, data.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.n + c] = v;
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        math::sqrt(self.data.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max))
    }

    fn lu(&self) -> Option<Lu> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = self.max_abs();
        if scale == 0.0 || !scale.is_finite() {
            return None;
        }
        let tol = scale * f64::EPSILON * n as f64;
        for col in 0..n {
            let (piv, piv_abs) = (col..n)
                .map(|r| (r, a[r * n + col].norm_sqr()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if math::sqrt(piv_abs) <= tol {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(piv * n + j, col * n + j);
                }
                perm.swap(piv, col);
                sign = -sign;
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                a[r * n + col] = f;
                for j in col + 1..n {
                    let v = a[col * n + j];
                    a[r * n + j] -= f * v;
                }
            }
        }
        Some(Lu { n, a, perm, sign })
    }

    /// Solves `self * x = b`; `None` when numerically singular.
    pub fn solve(&self, b: &[Complex64]) -> Option<Vec<Complex64>> {
        self.lu().map(|lu| lu.solve(b))
    }

    pub fn inverse(&self) -> Option<CMatrix> {
        let lu = self.lu()?;
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            e[j] = Complex64::new(1.0, 0.0);
            let col = lu.solve(&e);
            for i in 0..n {
                out.set(i, j, col[i]);
            }
        }
        Some(out)
    }

    /// `log |det A|`; `-inf` when singular.
    pub fn log_abs_det(&self) -> f64 {
        match self.lu() {
            Some(lu) => (0..self.n)
                .map(|i| 0.5 * math::ln(lu.a[i * self.n + i].norm_sqr()))
                .sum(),
            None => f64::NEG_INFINITY,
        }
    }
}

struct Lu {
    n: usize,
    a: Vec<Complex64>,
    perm: Vec<usize>,
    #[allow(dead_code)]
    sign: f64,
}

impl Lu {
    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let v = x[j];
                x[i] -= self.a[i * n + j] * v;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = x[j];
                x[i] -= self.a[i * n + j] * v;
            }
            x[i] /= self.a[i * n + i];
        }
        x
    }
}

/// In-place Cholesky factorization of a symmetric positive definite
/// row-major `n x n` matrix; the lower triangle receives `L`.
/// Returns `false` when a pivot is not strictly positive.
pub fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = math::sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let (ri, rj) = (i * n, j * n);
            let mut s = a[ri + j];
            for k in 0..j {
                s -= a[ri + k] * a[rj + k];
            }
            a[ri + j] = s / d;
        }
    }
    true
}

/// Solves `L L^T x = b` given the factor produced by [`cholesky`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Cholesky solve with a Tikhonov fallback: when `a` is not numerically
/// positive definite, `delta * trace(a)` is added to the diagonal.
pub fn spd_factor(a: &[f64], n: usize, delta: f64) -> Option<Vec<f64>> {
    let mut l = a.to_vec();
    if cholesky(&mut l, n) {
        return Some(l);
    }
    let tr: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let reg = delta * tr.max(f64::MIN_POSITIVE);
    l.copy_from_slice(a);
    for i in 0..n {
        l[i * n + i] += reg;
    }
    cholesky(&mut l, n).then_some(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solve_recovers_known_vector() {
        let a = CMatrix::from_rows(2, vec![c(2.0, 1.0), c(0.5, 0.0), c(-1.0, 0.3), c(3.0, -2.0)]);
        let x = vec![c(1.0, -1.0), c(0.25, 2.0)];
        let b = a.matvec(&x);
        let got = a.solve(&b).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = CMatrix::from_rows(
            3,
            vec![
                c(1.0, 0.0), c(2.0, 1.0), c(0.0, 0.5),
                c(0.3, 0.0), c(1.0, 0.0), c(4.0, 0.0),
                c(0.0, 1.0), c(0.0, 0.0), c(1.0, 1.0),
            ],
        );
        let p = a.matmul(&a.inverse().unwrap());
        let id = CMatrix::identity(3);
        for (x, y) in p.as_slice().iter().zip(id.as_slice()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = CMatrix::from_real(2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(a.solve(&[c(1.0, 0.0), c(0.0, 0.0)]).is_none());
        assert_eq!(a.log_abs_det(), f64::NEG_INFINITY);
    }

    #[test]
    fn log_abs_det_of_diagonal() {
        let a = CMatrix::from_rows(2, vec![c(0.0, 2.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        assert!((a.log_abs_det() - (6.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let l = spd_factor(&a, 3, 1e-10).unwrap();
        let x = cholesky_solve(&l, 3, &[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn tikhonov_fallback_handles_rank_deficiency() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(spd_factor(&a, 2, 1e-10).is_some());
    }
}
