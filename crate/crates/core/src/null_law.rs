//! Closed-form asymptotic null law of the truncated trace statistic.
//!
//! Everything here is a function of the finite-sample ratios y₁ = p/n₁ and
//! y₂ = p/n₂; no limits are taken.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratios within this distance of 1 trigger a boundary warning.
pub const BOUNDARY_WARNING_BAND: f64 = 0.02;

/// Sign pattern of (y₁ − 1, y₂ − 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// y₁ > 1, y₂ > 1
    I,
    /// y₁ > 1, y₂ < 1
    II,
    /// y₁ < 1, y₂ > 1
    III,
    /// y₁ < 1, y₂ < 1
    IV,
    /// y₁ = 1 or y₂ = 1 exactly
    Boundary,
}

impl Regime {
    pub fn classify(y1: f64, y2: f64) -> Self {
        use std::cmp::Ordering::*;
        match (y1.partial_cmp(&1.0), y2.partial_cmp(&1.0)) {
            (Some(Greater), Some(Greater)) => Regime::I,
            (Some(Greater), Some(Less)) => Regime::II,
            (Some(Less), Some(Greater)) => Regime::III,
            (Some(Less), Some(Less)) => Regime::IV,
            _ => Regime::Boundary,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::I => "i",
            Regime::II => "ii",
            Regime::III => "iii",
            Regime::IV => "iv",
            Regime::Boundary => "boundary",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Dimension ratios and support of the limiting spectral law of B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub y1: f64,
    pub y2: f64,
    /// n₂ / n₁
    pub alpha_n: f64,
    /// √(y₁ + y₂ − y₁y₂)
    pub h: f64,
    pub x_l: f64,
    pub x_r: f64,
    pub regime: Regime,
    pub warnings: Vec<String>,
}

impl SpectralParams {
    /// h² = y₁ + y₂ − y₁y₂.
    pub fn h2(&self) -> f64 {
        self.h * self.h
    }

    /// Swaps the roles of the two samples.
    pub fn swapped(&self) -> Result<Self> {
        spectral_params(self.n2, self.n1, self.p)
    }

    pub fn near_boundary(&self) -> bool {
        (self.y1 - 1.0).abs() < BOUNDARY_WARNING_BAND || (self.y2 - 1.0).abs() < BOUNDARY_WARNING_BAND
    }
}

pub fn spectral_params(n1: usize, n2: usize, p: usize) -> Result<SpectralParams> {
    for n in [n1, n2] {
        if n < 2 {
            return Err(Error::TooFewObservations { required: 2, got: n });
        }
    }
    if p < 2 {
        return Err(Error::DimensionTooSmall(p));
    }
    if p >= n1 + n2 {
        return Err(Error::DimensionTooLarge { p, sum: n1 + n2 });
    }
    let y1 = p as f64 / n1 as f64;
    let y2 = p as f64 / n2 as f64;
    let h2 = y1 + y2 - y1 * y2;
    let h = h2.sqrt();
    let s2 = (y1 + y2) * (y1 + y2);
    let x_l = y2 * (h - y1).powi(2) / s2;
    let x_r = y2 * (h + y1).powi(2) / s2;
    let mut warnings = Vec::new();
    for (name, y) in [("y1", y1), ("y2", y2)] {
        if (y - 1.0).abs() < BOUNDARY_WARNING_BAND {
            warnings.push(format!(
                "{name} = {y:.4} is within {BOUNDARY_WARNING_BAND} of 1; the asymptotic law excludes y = 1"
            ));
        }
    }
    Ok(SpectralParams {
        n1,
        n2,
        p,
        y1,
        y2,
        alpha_n: n2 as f64 / n1 as f64,
        h,
        x_l,
        x_r,
        regime: Regime::classify(y1, y2),
        warnings,
    })
}

/// Density of the continuous part of the limiting spectral law of B.
///
/// Zero outside (x_l, x_r). When y₁ > 1 or y₂ > 1 the total mass is below
/// one; the missing mass sits in atoms at 0 and 1, which callers handle.
pub fn lsd_density(x: f64, sp: &SpectralParams) -> f64 {
    if !(x > sp.x_l && x < sp.x_r) {
        return 0.0;
    }
    let root = ((sp.x_r - x) * (x - sp.x_l)).sqrt();
    (sp.alpha_n + 1.0) * root / (2.0 * PI * sp.y1 * x * (1.0 - x))
}

/// Excess fourth moments Δ = E x⁴ − 3 of the two populations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KurtosisSpec {
    pub delta1: f64,
    pub delta2: f64,
}

impl KurtosisSpec {
    pub fn new(delta1: f64, delta2: f64) -> Result<Self> {
        for d in [delta1, delta2] {
            if !(d >= -2.0) {
                return Err(Error::KurtosisOutOfRange(d));
            }
        }
        Ok(Self { delta1, delta2 })
    }

    /// Both populations Gaussian.
    pub fn gaussian() -> Self {
        Self {
            delta1: 0.0,
            delta2: 0.0,
        }
    }

    pub fn common(delta: f64) -> Result<Self> {
        Self::new(delta, delta)
    }

    pub fn swapped(self) -> Self {
        Self {
            delta1: self.delta2,
            delta2: self.delta1,
        }
    }
}

/// Centering, mean shift and variance of the null limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullLaw {
    pub ell1: f64,
    pub ell2: f64,
    pub mu: f64,
    pub sigma2: f64,
}

impl NullLaw {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// ℓ₁ = ∫x dF and ℓ₂ = ∫(1−x) dF over the continuous part of the limit law.
pub fn centering_terms(sp: &SpectralParams) -> (f64, f64) {
    let (y1, y2, h2) = (sp.y1, sp.y2, sp.h2());
    let sum = y1 + y2;
    let ell1 = if y2 > 1.0 { h2 } else { y2 * y2 } / (y2 * sum);
    let ell2 = if y1 > 1.0 { h2 } else { y1 * y1 } / (y1 * sum);
    (ell1, ell2)
}

/// The common factor h²y₁²y₂²/(y₁+y₂)⁴.
fn base_factor(sp: &SpectralParams) -> f64 {
    let (y1, y2) = (sp.y1, sp.y2);
    sp.h2() * y1 * y1 * y2 * y2 / (y1 + y2).powi(4)
}

/// μₙ = (Δ₂ − Δ₁)·h²y₁²y₂²/(y₁+y₂)⁴.
pub fn mean_shift(sp: &SpectralParams, ks: KurtosisSpec) -> f64 {
    (ks.delta2 - ks.delta1) * base_factor(sp)
}

/// σₙ² = 2h²y₁²y₂²/(y₁+y₂)⁴ + (Δ₁y₁ + Δ₂y₂)·h⁴y₁²y₂²/(y₁+y₂)⁶.
pub fn variance(sp: &SpectralParams, ks: KurtosisSpec) -> f64 {
    let base = base_factor(sp);
    let kurt = (ks.delta1 * sp.y1 + ks.delta2 * sp.y2) * sp.h2() / (sp.y1 + sp.y2).powi(2);
    base * (2.0 + kurt)
}

pub fn mean_variance(sp: &SpectralParams, ks: KurtosisSpec) -> Result<NullLaw> {
    let ks = KurtosisSpec::new(ks.delta1, ks.delta2)?;
    let (ell1, ell2) = centering_terms(sp);
    let sigma2 = variance(sp, ks);
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    Ok(NullLaw {
        ell1,
        ell2,
        mu: mean_shift(sp, ks),
        sigma2,
    })
}

/// p·(ℓ₁ + ℓ₂) should equal this count of non-atomic eigenvalues.
pub fn expected_interior_count(n1: usize, n2: usize, p: usize) -> usize {
    p - p.saturating_sub(n1) - p.saturating_sub(n2)
}
