//! Cholesky factorization of symmetric positive definite matrices.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lower-triangular factor L with strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular(Matrix);

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn values(&self) -> &Matrix {
        &self.0
    }

    /// L·Lᵀ.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim();
        let l = &self.0;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = l.row(i)[..=j].iter().zip(&l.row(j)[..=j]).map(|(a, b)| a * b).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    /// Solves L·X = B in place, treating B row-major (one right-hand side per column).
    pub fn forward_solve_in_place(&self, b: &mut Matrix) -> Result<()> {
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows, factor has dimension {n}",
                b.rows()
            )));
        }
        let l = &self.0;
        let cols = b.cols();
        let mut acc = vec![0.0; cols];
        for i in 0..n {
            acc.copy_from_slice(b.row(i));
            for k in 0..i {
                let lik = l[(i, k)];
                if lik == 0.0 {
                    continue;
                }
                for (a, &x) in acc.iter_mut().zip(b.row(k)) {
                    *a -= lik * x;
                }
            }
            let d = l[(i, i)];
            for (dst, a) in b.row_mut(i).iter_mut().zip(&acc) {
                *dst = a / d;
            }
        }
        Ok(())
    }

    /// L⁻¹·A·L⁻ᵀ for symmetric A, symmetrized on output.
    pub fn congruence_inverse(&self, a: &Matrix) -> Result<Matrix> {
        let mut w = a.clone();
        self.forward_solve_in_place(&mut w)?;
        // (L⁻¹A)ᵀ = A L⁻ᵀ since A is symmetric
        let mut c = w.transpose();
        self.forward_solve_in_place(&mut c)?;
        c.symmetrize();
        Ok(c)
    }
}

/// Factors a symmetric positive definite matrix as L·Lᵀ.
///
/// A pivot not exceeding p·1e-14·max(diag) is reported as
/// [`Error::NotPositiveDefinite`] with its 1-based index.
pub fn cholesky_factor(m: &Matrix) -> Result<LowerTriangular> {
    m.ensure_symmetric()?;
    let n = m.rows();
    let max_diag = (0..n).fold(0.0_f64, |acc, i| acc.max(m[(i, i)]));
    let threshold = n as f64 * 1e-14 * max_diag;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let row_j = &l.row(j)[..j];
        let pivot = m[(j, j)] - row_j.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > threshold) {
            return Err(Error::NotPositiveDefinite {
                pivot: j + 1,
                value: pivot,
            });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let s: f64 = l.row(i)[..j].iter().zip(&l.row(j)[..j]).map(|(a, b)| a * b).sum();
            l[(i, j)] = (m[(i, j)] - s) / d;
        }
    }
    Ok(LowerTriangular(l))
}
