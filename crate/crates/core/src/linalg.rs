//! Small dense complex solvers.
//!
//! Element counts stay in the tens, so Gram systems are tiny and direct
//! factorizations are both simplest and fastest. Two independent routes are
//! provided on purpose: a Cholesky factorization for Hermitian positive
//! definite systems and an LU factorization with partial pivoting for
//! general ones. The beamforming solvers use one route each so their
//! agreement is a meaningful cross-check.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solve A x = b for Hermitian positive definite A via Cholesky.
///
/// Fails with a descriptive error when a pivot collapses, which for Gram
/// systems means the matrix is numerically singular.
pub fn cholesky_solve(a: &Array2<Complex64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "matrix must be square");
    assert_eq!(b.len(), n, "rhs length must match");

    // lower-triangular factor, row-major
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            if i == j {
                let d = s.re;
                if !(d.is_finite() && d > 0.0) {
                    return Err(Error::Numerical(format!(
                        "Cholesky pivot {i} is not positive ({d:.3e}); matrix is numerically singular"
                    )));
                }
                l[i * n + i] = Complex64::new(d.sqrt(), 0.0);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }

    // forward then back substitution
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let lik = l[i * n + k];
            y[i] = y[i] - lik * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l[k * n + i].conj();
            y[i] = y[i] - lki * y[k];
        }
        y[i] /= l[i * n + i];
    }
    Ok(y)
}

/// LU factorization with partial pivoting, reusable across several solves.
pub struct LuFactors {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
}

pub fn lu_factor(a: &Array2<Complex64>) -> Result<LuFactors> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "matrix must be square");
    let mut lu: Vec<Complex64> = a.iter().cloned().collect();
    let mut perm: Vec<usize> = (0..n).collect();

    for col in 0..n {
        let mut p = col;
        let mut best = lu[col * n + col].norm();
        for r in (col + 1)..n {
            let v = lu[r * n + col].norm();
            if v > best {
                best = v;
                p = r;
            }
        }
        if !(best.is_finite() && best > 0.0) {
            return Err(Error::Numerical(format!(
                "LU pivot in column {col} vanished; matrix is numerically singular"
            )));
        }
        if p != col {
            for k in 0..n {
                lu.swap(col * n + k, p * n + k);
            }
            perm.swap(col, p);
        }
        let piv = lu[col * n + col];
        for r in (col + 1)..n {
            let f = lu[r * n + col] / piv;
            lu[r * n + col] = f;
            for k in (col + 1)..n {
                let v = lu[col * n + k];
                lu[r * n + k] = lu[r * n + k] - f * v;
            }
        }
    }
    Ok(LuFactors { n, lu, perm })
}

impl LuFactors {
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(b.len(), n, "rhs length must match");
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for k in 0..i {
                let lik = self.lu[i * n + k];
                x[i] = x[i] - lik * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let uik = self.lu[i * n + k];
                x[i] = x[i] - uik * x[k];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

/// Spectral condition estimate of a Hermitian positive definite matrix:
/// a few rounds of power iteration for the largest eigenvalue and inverse
/// iteration (through Cholesky) for the smallest.
pub fn cond_estimate_hermitian(a: &Array2<Complex64>) -> f64 {
    let n = a.nrows();
    if n == 1 {
        return 1.0;
    }
    let matvec = |x: &[Complex64]| -> Vec<Complex64> {
        (0..n)
            .map(|i| (0..n).map(|j| a[[i, j]] * x[j]).sum())
            .collect()
    };
    let norm = |x: &[Complex64]| x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();

    // deterministic start vector with all components engaged
    let mut x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0, (i as f64 + 1.0) * 0.1))
        .collect();
    let mut lam_max = 0.0;
    for _ in 0..8 {
        let y = matvec(&x);
        lam_max = norm(&y) / norm(&x);
        let s = 1.0 / norm(&y);
        x = y.into_iter().map(|v| v * s).collect();
    }

    let lam_min = match lu_factor(a) {
        Ok(f) => {
            let mut x: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(1.0, -(i as f64 + 1.0) * 0.1))
                .collect();
            let mut inv_lam = 0.0;
            for _ in 0..8 {
                let y = f.solve(&x);
                inv_lam = norm(&y) / norm(&x);
                let s = 1.0 / norm(&y);
                x = y.into_iter().map(|v| v * s).collect();
            }
            if inv_lam > 0.0 { 1.0 / inv_lam } else { 0.0 }
        }
        Err(_) => 0.0,
    };

    if lam_min > 0.0 && lam_max.is_finite() {
        lam_max / lam_min
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cholesky_solves_hermitian_system() {
        let a = array![
            [c(4.0, 0.0), c(1.0, 1.0)],
            [c(1.0, -1.0), c(3.0, 0.0)],
        ];
        let x_true = vec![c(0.3, -0.2), c(-1.1, 0.7)];
        let b: Vec<Complex64> = (0..2)
            .map(|i| (0..2).map(|j| a[[i, j]] * x_true[j]).sum())
            .collect();
        let x = cholesky_solve(&a, &b).unwrap();
        for (got, want) in x.iter().zip(&x_true) {
            assert!((got - want).norm() < 1e-12, "got {got}, want {want}");
        }
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = array![
            [c(1.0, 0.0), c(1.0, 0.0)],
            [c(1.0, 0.0), c(1.0, 0.0)],
        ];
        let err = cholesky_solve(&a, &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap_err();
        assert!(err.to_string().contains("singular"), "{err}");
    }

    #[test]
    fn lu_solves_general_system_with_pivoting() {
        let a = array![
            [c(0.0, 0.0), c(2.0, 1.0), c(0.5, 0.0)],
            [c(1.0, -0.5), c(0.1, 0.0), c(-1.0, 2.0)],
            [c(0.3, 0.3), c(0.0, -1.0), c(2.0, 0.0)],
        ];
        let x_true = vec![c(1.0, 1.0), c(-0.5, 0.25), c(0.0, -2.0)];
        let b: Vec<Complex64> = (0..3)
            .map(|i| (0..3).map(|j| a[[i, j]] * x_true[j]).sum())
            .collect();
        let f = lu_factor(&a).unwrap();
        let x = f.solve(&b);
        for (got, want) in x.iter().zip(&x_true) {
            assert!((got - want).norm() < 1e-12, "got {got}, want {want}");
        }
    }

    #[test]
    fn cond_estimate_tracks_diagonal_ratio() {
        let a = array![
            [c(100.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0)],
        ];
        let k = cond_estimate_hermitian(&a);
        assert!((k - 100.0).abs() / 100.0 < 1e-6, "got {k}");
    }
}
