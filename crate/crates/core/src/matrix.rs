//! Dense row-major matrices, observation samples, and scatter matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking symmetry of inputs.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A dense, row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from a flat row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "buffer of length {} cannot hold a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Plain triple-loop product, ordered i-k-j for row-major access.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest |a_ij - a_ji| relative to the largest entry.
    pub fn relative_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.is_square() && self.relative_asymmetry() <= rel_tol
    }

    pub(crate) fn ensure_symmetric(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let asym = self.relative_asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(())
    }

    /// Copies the upper triangle onto the lower one.
    pub fn symmetrize_from_upper(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                self[(j, i)] = self[(i, j)];
            }
        }
    }

    /// Replaces the matrix by (M + Mᵀ)/2.
    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// An n×p sample; row i is observation zᵢ.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix(Matrix);

impl ObservationMatrix {
    /// Validates shape (n ≥ 2, p ≥ 2) and finiteness.
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() < 2 {
            return Err(Error::TooFewObservations {
                required: 2,
                got: values.rows(),
            });
        }
        if values.cols() < 2 {
            return Err(Error::DimensionTooSmall(values.cols()));
        }
        if let Some(idx) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / values.cols(),
                col: idx % values.cols(),
            });
        }
        Ok(Self(values))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn n_obs(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    pub fn column_means(&self) -> Vec<f64> {
        let (n, p) = (self.n_obs(), self.dim());
        let mut mean = vec![0.0; p];
        for i in 0..n {
            for (m, &v) in mean.iter_mut().zip(self.0.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        mean
    }
}

/// Centre used when forming a scatter matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CenteringMode {
    /// Population mean known to be zero; rows are used as-is.
    #[default]
    KnownZeroMean,
    /// Rows are centred by the column means, losing one degree of freedom.
    SampleMean,
}

impl CenteringMode {
    /// Degrees of freedom of a scatter built from `n` rows.
    pub fn degrees_of_freedom(self, n: usize) -> usize {
        match self {
            CenteringMode::KnownZeroMean => n,
            CenteringMode::SampleMean => n.saturating_sub(1),
        }
    }
}

/// A = Σ (zᵢ − c)(zᵢ − c)ᵀ, i.e. n·S with the divisor-n convention.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMatrix {
    values: Matrix,
    n_obs: usize,
    centering: CenteringMode,
}

impl ScatterMatrix {
    /// Wraps an existing symmetric matrix as a scatter from `n_obs` observations.
    pub fn from_matrix(values: Matrix, n_obs: usize, centering: CenteringMode) -> Result<Self> {
        values.ensure_symmetric()?;
        Ok(Self {
            values,
            n_obs,
            centering,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.rows()
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn centering(&self) -> CenteringMode {
        self.centering
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// Effective sample size entering the null law (n, or n − 1 after centring).
    pub fn degrees_of_freedom(&self) -> usize {
        self.centering.degrees_of_freedom(self.n_obs)
    }

    /// Upper bound on rank: min(p, dof).
    pub fn effective_rank_bound(&self) -> usize {
        self.dim().min(self.degrees_of_freedom())
    }
}

/// Forms the scatter matrix of `data` under the given centring.
pub fn scatter(data: &ObservationMatrix, centering: CenteringMode) -> Result<ScatterMatrix> {
    let (n, p) = (data.n_obs(), data.dim());
    if centering == CenteringMode::SampleMean && n < 2 {
        return Err(Error::TooFewObservations { required: 2, got: n });
    }
    let center = match centering {
        CenteringMode::KnownZeroMean => None,
        CenteringMode::SampleMean => Some(data.column_means()),
    };
    let mut a = Matrix::zeros(p, p);
    let mut buf = vec![0.0; p];
    for i in 0..n {
        let row = data.values().row(i);
        match &center {
            Some(c) => buf.iter_mut().zip(row.iter().zip(c)).for_each(|(b, (v, m))| *b = v - m),
            None => buf.copy_from_slice(row),
        }
        for j in 0..p {
            let bj = buf[j];
            if bj == 0.0 {
                continue;
            }
            let dst = &mut a.row_mut(j)[j..];
            for (d, &bk) in dst.iter_mut().zip(&buf[j..]) {
                *d += bj * bk;
            }
        }
    }
    a.symmetrize_from_upper();
    Ok(ScatterMatrix {
        values: a,
        n_obs: n,
        centering,
    })
}
