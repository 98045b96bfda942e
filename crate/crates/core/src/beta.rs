//! Eigenvalues of the Beta matrix B = A₁(A₁ + A₂)⁻¹.
//!
//! B is not symmetric, but it is similar to C = L⁻¹A₁L⁻ᵀ where L is the
//! Cholesky factor of A₁ + A₂, so its spectrum comes from a symmetric solve.

use serde::{Deserialize, Serialize};

use crate::cholesky::cholesky_factor;
use crate::eigen::{symmetric_eigenvalues_with, EigenMethod};
use crate::error::{Error, Result};
use crate::matrix::ScatterMatrix;

/// Default threshold for classifying an eigenvalue as exactly 0 or 1.
pub const DEFAULT_CLAMP_EPS: f64 = 1e-8;

/// Sorted spectrum of B with counts of the eigenvalues sitting at 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSpectrum {
    eigenvalues: Vec<f64>,
    count_zero: usize,
    count_one: usize,
    clamp_tolerance: f64,
    warnings: Vec<String>,
}

impl BetaSpectrum {
    /// Builds a spectrum from raw eigenvalues: sorts, clamps to [0, 1] and
    /// counts values within `eps` of either end.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, eps: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&eps) {
            return Err(Error::InvalidConfig(format!("clamp tolerance {eps} outside [0, 0.5)")));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite eigenvalue".into()));
        }
        for v in &mut eigenvalues {
            *v = v.clamp(0.0, 1.0);
        }
        eigenvalues.sort_by(f64::total_cmp);
        let count_zero = eigenvalues.iter().filter(|&&v| v <= eps).count();
        let count_one = eigenvalues.iter().filter(|&&v| v >= 1.0 - eps).count();
        Ok(Self {
            eigenvalues,
            count_zero,
            count_one,
            clamp_tolerance: eps,
            warnings: Vec::new(),
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn count_zero(&self) -> usize {
        self.count_zero
    }

    pub fn count_one(&self) -> usize {
        self.count_one
    }

    pub fn count_interior(&self) -> usize {
        self.dim() - self.count_zero - self.count_one
    }

    pub fn clamp_tolerance(&self) -> f64 {
        self.clamp_tolerance
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_zero(&self, v: f64) -> bool {
        v <= self.clamp_tolerance
    }

    pub fn is_one(&self, v: f64) -> bool {
        v >= 1.0 - self.clamp_tolerance
    }

    /// Eigenvalues classified as strictly inside (0, 1).
    pub fn interior(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues
            .iter()
            .copied()
            .filter(move |&v| !self.is_zero(v) && !self.is_one(v))
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }
}

/// Spectrum of A₁(A₁ + A₂)⁻¹ via the default eigensolver.
pub fn beta_spectrum(a1: &ScatterMatrix, a2: &ScatterMatrix, eps: f64) -> Result<BetaSpectrum> {
    beta_spectrum_with(a1, a2, eps, EigenMethod::default())
}

pub fn beta_spectrum_with(
    a1: &ScatterMatrix,
    a2: &ScatterMatrix,
    eps: f64,
    method: EigenMethod,
) -> Result<BetaSpectrum> {
    if a1.dim() != a2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "scatter matrices have dimensions {} and {}",
            a1.dim(),
            a2.dim()
        )));
    }
    let pooled = a1.values().add(a2.values())?;
    let l = cholesky_factor(&pooled)?;
    let c = l.congruence_inverse(a1.values())?;
    let raw = symmetric_eigenvalues_with(&c, method)?;
    let mut spectrum = BetaSpectrum::from_eigenvalues(raw, eps)?;

    let p = a1.dim();
    let expected_zero = p - a1.effective_rank_bound();
    let expected_one = p - a2.effective_rank_bound();
    if spectrum.count_zero != expected_zero {
        spectrum.warnings.push(format!(
            "{} eigenvalues classified as 0, rank of the first scatter implies {}",
            spectrum.count_zero, expected_zero
        ));
    }
    if spectrum.count_one != expected_one {
        spectrum.warnings.push(format!(
            "{} eigenvalues classified as 1, rank of the second scatter implies {}",
            spectrum.count_one, expected_one
        ));
    }
    Ok(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{CenteringMode, Matrix};

    fn scatter_of(m: Matrix, n: usize) -> ScatterMatrix {
        ScatterMatrix::from_matrix(m, n, CenteringMode::KnownZeroMean).unwrap()
    }

    #[test]
    fn equal_scatters_give_one_half() {
        let a = scatter_of(Matrix::identity(4), 10);
        let s = beta_spectrum(&a, &a, DEFAULT_CLAMP_EPS).unwrap();
        assert!(s.eigenvalues().iter().all(|v| (v - 0.5).abs() < 1e-15));
        assert_eq!((s.count_zero(), s.count_one()), (0, 0));
        assert!(s.warnings().is_empty());
    }

    #[test]
    fn scalar_multiples_commute() {
        let a1 = scatter_of(Matrix::identity(3).scale(3.0), 10);
        let a2 = scatter_of(Matrix::identity(3), 10);
        let s = beta_spectrum(&a1, &a2, DEFAULT_CLAMP_EPS).unwrap();
        assert!(s.eigenvalues().iter().all(|v| (v - 0.75).abs() < 1e-15));
    }

    #[test]
    fn classification_and_interior() {
        let s = BetaSpectrum::from_eigenvalues(vec![1.0 + 1e-12, 0.3, -1e-14, 0.7], 1e-8).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0, 0.3, 0.7, 1.0]);
        assert_eq!((s.count_zero(), s.count_one(), s.count_interior()), (1, 1, 2));
        assert_eq!(s.interior().collect::<Vec<_>>(), vec![0.3, 0.7]);
    }

    #[test]
    fn dimension_mismatch_and_singular_pool() {
        let a = scatter_of(Matrix::identity(3), 5);
        let b = scatter_of(Matrix::identity(2), 5);
        assert!(matches!(beta_spectrum(&a, &b, 1e-8), Err(Error::DimensionMismatch(_))));
        let z = scatter_of(Matrix::zeros(3, 3), 5);
        assert!(matches!(beta_spectrum(&z, &z, 1e-8), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
    }

    #[test]
    fn rank_mismatch_is_recorded() {
        // A₁ has rank 1 but claims 5 observations in p = 2, so zero zeros are expected.
        let a1 = scatter_of(Matrix::from_diag(&[1.0, 0.0]), 5);
        let a2 = scatter_of(Matrix::identity(2), 5);
        let s = beta_spectrum(&a1, &a2, 1e-8).unwrap();
        assert_eq!(s.count_zero(), 1);
        assert_eq!(s.warnings().len(), 1);
    }
}
