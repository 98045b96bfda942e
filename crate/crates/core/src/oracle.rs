//! Independent numerical checks of the closed-form null law: quadrature of
//! moments of the limiting spectral law, trapezoid-rule contour integrals for
//! the mean and variance, and Monte Carlo moments.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engine::MlrtConfig;
use crate::error::{Error, Result};
use crate::matrix::CenteringMode;
use crate::null_law::{
    centering_terms, mean_variance, spectral_params, KurtosisSpec, SpectralParams,
};
use crate::rng::{mix_words, Purpose};
use crate::sim::{replicate_statistics, Distribution, Scenario, SigmaStructure};

/// Largest node count any adaptive rule may use.
pub const MAX_NODES: usize = 1 << 20;

/// A singularity closer than this to the contour is a configuration error.
pub const POLE_CLEARANCE: f64 = 1e-6;

const QUAD_TOL: f64 = 1e-12;
const CONTOUR_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LsdMoment {
    /// ∫ dF
    One,
    /// ∫ x dF
    X,
    /// ∫ (1 − x) dF
    OneMinusX,
}

impl LsdMoment {
    fn eval(self, x: f64) -> f64 {
        match self {
            LsdMoment::One => 1.0,
            LsdMoment::X => x,
            LsdMoment::OneMinusX => 1.0 - x,
        }
    }
}

/// Gauss–Chebyshev (second kind) rule with N nodes on x = m + ρt, which
/// absorbs the square-root behavior of the density at both edges.
fn chebyshev_u_rule(sp: &SpectralParams, f: LsdMoment, n: usize) -> f64 {
    let mid = 0.5 * (sp.x_l + sp.x_r);
    let half = 0.5 * (sp.x_r - sp.x_l);
    let scale = (sp.alpha_n + 1.0) / (2.0 * PI * sp.y1);
    let step = PI / (n + 1) as f64;
    let mut sum = 0.0;
    for i in 1..=n {
        let (s, c) = (i as f64 * step).sin_cos();
        let x = mid + half * c;
        sum += s * s * f.eval(x) / (x * (1.0 - x));
    }
    scale * half * half * step * sum
}

/// ∫ f dF over the continuous part of the limiting spectral law of B.
pub fn quad_lsd_moment(sp: &SpectralParams, f: LsdMoment) -> Result<f64> {
    let mut n = 64;
    let mut prev = chebyshev_u_rule(sp, f, n);
    while n < MAX_NODES {
        n *= 2;
        let next = chebyshev_u_rule(sp, f, n);
        if (next - prev).abs() <= QUAD_TOL * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNonConvergence { nodes: n })
}

/// Radii and node counts for the contour integrals.
///
/// `r` is the smallest radius of the extrapolation ladder
/// r, 1 + (r−1)/2, 1 + (r−1)/4, … and the first radius of the variance
/// integral. `r2` caps the second radius, which is otherwise placed halfway
/// to the nearest singularity outside the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourConfig {
    pub r: f64,
    pub r2: f64,
    pub nodes: usize,
    pub extrapolation: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            r: 1.0 + 2f64.powi(-6),
            r2: 1.5,
            nodes: 2048,
            extrapolation: 3,
        }
    }
}

impl ContourConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 1.0 && self.r < self.r2 && self.r2 <= 1.5) {
            return Err(Error::InvalidConfig(format!(
                "contour radii must satisfy 1 < r < r2 <= 1.5, got r = {}, r2 = {}",
                self.r, self.r2
            )));
        }
        if self.nodes < 512 || !self.nodes.is_power_of_two() || self.nodes > MAX_NODES {
            return Err(Error::InvalidConfig(format!(
                "nodes must be a power of two in [512, {MAX_NODES}], got {}",
                self.nodes
            )));
        }
        if self.extrapolation == 0 || self.extrapolation > 6 {
            return Err(Error::InvalidConfig(format!(
                "extrapolation levels must be in 1..=6, got {}",
                self.extrapolation
            )));
        }
        Ok(())
    }
}

/// The ξ-parameterization of m on |ξ| = 1 for one radius.
#[derive(Debug, Clone, Copy)]
struct Contour {
    y1: f64,
    y2: f64,
    h: f64,
    alpha: f64,
    r: f64,
}

impl Contour {
    fn new(sp: &SpectralParams, r: f64) -> Result<Self> {
        if sp.y2 == 1.0 {
            return Err(Error::InvalidConfig("contour integrals require y2 != 1".into()));
        }
        let c = Self {
            y1: sp.y1,
            y2: sp.y2,
            h: sp.h,
            alpha: sp.alpha_n,
            r,
        };
        for s in singularities(sp) {
            let distance = (s / r - 1.0).abs();
            if distance < POLE_CLEARANCE {
                return Err(Error::PoleProximity { pole: s / r, distance });
            }
        }
        Ok(c)
    }

    /// (m, dm/dξ) at ξ.
    fn m(&self, xi: Complex64) -> (Complex64, Complex64) {
        let k = 1.0 - self.y2;
        if self.y2 > 1.0 {
            let t = self.h / self.r;
            (-(1.0 + t / xi) / k, t / (xi * xi) / k)
        } else {
            let t = self.h * self.r;
            (-(1.0 + t * xi) / k, Complex64::new(-t / k, 0.0))
        }
    }

    /// z/(α + z) as a function of m.
    fn f(&self, m: Complex64) -> Complex64 {
        let z = -m * (m + 1.0 - self.y1) / ((1.0 - self.y2) * m + 1.0);
        z / (self.alpha + z)
    }

    /// Nodes ξ_k and weights dξ_k of the N-point trapezoid rule.
    fn nodes(n: usize) -> impl Iterator<Item = (Complex64, Complex64)> {
        let step = 2.0 * PI / n as f64;
        (0..n).map(move |k| {
            let xi = Complex64::from_polar(1.0, k as f64 * step);
            (xi, Complex64::i() * xi * step)
        })
    }
}

/// Moduli |c| of the ξ-positions (at r = 1) of every singularity of the
/// integrands: poles of z/(α+z), m = −1, and zeros of (1−y₂)m² + 2m + 1 − y₁.
fn singularities(sp: &SpectralParams) -> Vec<f64> {
    let (y1, y2, h, alpha) = (sp.y1, sp.y2, sp.h, sp.alpha_n);
    let mut ms = Vec::new();
    let mut quadratic = |a: f64, b: f64, c: f64| {
        if a == 0.0 {
            if b != 0.0 {
                ms.push(Complex64::new(-c / b, 0.0));
            }
            return;
        }
        let disc = Complex64::new(b * b - 4.0 * a * c, 0.0).sqrt();
        ms.push((-b + disc) / (2.0 * a));
        ms.push((-b - disc) / (2.0 * a));
    };
    quadratic(1.0, 1.0 - y1 - alpha * (1.0 - y2), -alpha);
    quadratic(1.0 - y2, 2.0, 1.0 - y1);
    ms.push(Complex64::new(-1.0, 0.0));
    ms.iter()
        .map(|&m| {
            let w = 1.0 + (1.0 - y2) * m;
            if y2 > 1.0 {
                (h / w).norm()
            } else {
                (w / h).norm()
            }
        })
        .filter(|v| v.is_finite())
        .collect()
}

/// Radius of the nearest singularity outside the unit circle (in r units);
/// contours must stay strictly inside it.
pub fn outer_singularity_radius(sp: &SpectralParams) -> f64 {
    singularities(sp)
        .into_iter()
        .filter(|&s| s > 1.0 + 1e-9)
        .fold(f64::INFINITY, f64::min)
}

/// Doubles the node count from `start` until two successive values agree.
fn adaptive<F: Fn(usize) -> Complex64>(start: usize, eval: F) -> Result<Complex64> {
    let mut n = start;
    let mut prev = eval(n);
    while n < MAX_NODES {
        n *= 2;
        let next = eval(n);
        if (next - prev).norm() <= CONTOUR_TOL * next.norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNonConvergence { nodes: n })
}

/// Richardson extrapolation toward r → 1 of values at r−1 = δ, δ/2, δ/4, …
fn richardson(values: &[f64]) -> f64 {
    let mut t = values.to_vec();
    let mut factor = 2.0;
    while t.len() > 1 {
        t = t.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
        factor *= 2.0;
    }
    t[0]
}

/// Radii of the extrapolation ladder, shrunk if the outer singularity is close.
fn ladder(sp: &SpectralParams, cc: &ContourConfig) -> Vec<f64> {
    let outer = outer_singularity_radius(sp);
    let mut delta = cc.r - 1.0;
    if 1.0 + delta >= 1.0 + (outer - 1.0) / 2.0 {
        delta = (outer - 1.0) / 4.0;
    }
    (0..cc.extrapolation).map(|k| 1.0 + delta / 2f64.powi(k as i32)).collect()
}

/// The three mean terms at one radius, before kurtosis weighting.
fn mean_terms(c: &Contour, start: usize) -> Result<[f64; 3]> {
    let (y1, y2) = (c.y1, c.y2);
    let t1 = adaptive(start, |n| {
        Contour::nodes(n)
            .map(|(xi, dxi)| {
                let (m, dm) = c.m(xi);
                let a = (1.0 - y2) * m * m + 2.0 * m + 1.0 - y1;
                let da = (2.0 * (1.0 - y2) * m + 2.0) * dm;
                c.f(m) * (da / a - 2.0 * dm / (1.0 + m)) * dxi
            })
            .sum::<Complex64>()
            / Complex64::new(0.0, 4.0 * PI)
    })?;
    let t2 = adaptive(start, |n| {
        Contour::nodes(n)
            .map(|(xi, dxi)| {
                let (m, dm) = c.m(xi);
                y1 * c.f(m) * dm / (1.0 + m).powi(3) * dxi
            })
            .sum::<Complex64>()
            / Complex64::new(0.0, 2.0 * PI)
    })?;
    let t3 = adaptive(start, |n| {
        Contour::nodes(n)
            .map(|(xi, dxi)| {
                let (m, dm) = c.m(xi);
                // d/dm [1 − y₂m²/(1+m)²] = −2y₂m/(1+m)³
                let db = -2.0 * y2 * m / (1.0 + m).powi(3) * dm;
                c.f(m) * db * dxi
            })
            .sum::<Complex64>()
            / Complex64::new(0.0, 4.0 * PI)
    })?;
    Ok([t1.re, t2.re, t3.re])
}

/// Numeric mean of the centered truncated sum (the μ of the null law).
pub fn contour_mean(sp: &SpectralParams, ks: KurtosisSpec, cc: &ContourConfig) -> Result<f64> {
    cc.validate()?;
    let mut values = Vec::with_capacity(cc.extrapolation);
    for (k, r) in ladder(sp, cc).into_iter().enumerate() {
        let c = Contour::new(sp, r)?;
        let [t1, t2, t3] = mean_terms(&c, cc.nodes << k)?;
        values.push(t1 + ks.delta1 * t2 + ks.delta2 * t3);
    }
    Ok(richardson(&values))
}

/// (1/2πi)∮ f dm/(1+m)² at one radius.
fn kurtosis_integral(c: &Contour, start: usize) -> Result<f64> {
    let v = adaptive(start, |n| {
        Contour::nodes(n)
            .map(|(xi, dxi)| {
                let (m, dm) = c.m(xi);
                c.f(m) * dm / ((1.0 + m) * (1.0 + m)) * dxi
            })
            .sum::<Complex64>()
            / Complex64::new(0.0, 2.0 * PI)
    })?;
    Ok(v.re)
}

/// The single integral whose square, times y₁Δ₁ + y₂Δ₂, is the kurtosis
/// part of the variance.
pub fn kurtosis_factor(sp: &SpectralParams, cc: &ContourConfig) -> Result<f64> {
    cc.validate()?;
    let c = Contour::new(sp, cc.r)?;
    kurtosis_integral(&c, cc.nodes)
}

/// Second radius for the variance double integral.
pub fn second_radius(sp: &SpectralParams, cc: &ContourConfig) -> f64 {
    let outer = outer_singularity_radius(sp);
    cc.r2.min(1.0 + (outer - 1.0) / 2.0)
}

/// −(1/2π²)∮∮ f(m₁)f(m₂)/(m₁−m₂)² dm₁dm₂ with |ξ₁| at r₁ < r₂.
fn double_term(c1: &Contour, c2: &Contour, n1: usize, n2: usize) -> Complex64 {
    let outer: Vec<(Complex64, Complex64)> = Contour::nodes(n2)
        .map(|(xi, dxi)| {
            let (m, dm) = c2.m(xi);
            (m, c2.f(m) * dm * dxi)
        })
        .collect();
    let total: Complex64 = Contour::nodes(n1)
        .map(|(xi, dxi)| {
            let (m1, dm1) = c1.m(xi);
            let w1 = c1.f(m1) * dm1 * dxi;
            let inner: Complex64 = outer
                .iter()
                .map(|&(m2, w2)| {
                    let d = m1 - m2;
                    w2 / (d * d)
                })
                .sum();
            w1 * inner
        })
        .sum();
    -total / (2.0 * PI * PI)
}

fn variance_at(sp: &SpectralParams, ks: KurtosisSpec, r1: f64, r2: f64, start: usize) -> Result<f64> {
    if !(r1 < r2) {
        return Err(Error::InvalidConfig(format!("variance radii need r1 < r2, got {r1} and {r2}")));
    }
    let c1 = Contour::new(sp, r1)?;
    let c2 = Contour::new(sp, r2)?;
    let outer_start = 512.min(start);
    // settle the outer circle first, then refine the inner one
    let mut n2 = outer_start;
    let mut prev = double_term(&c1, &c2, start, n2);
    loop {
        if n2 >= MAX_NODES / 64 {
            return Err(Error::QuadratureNonConvergence { nodes: n2 });
        }
        n2 *= 2;
        let next = double_term(&c1, &c2, start, n2);
        let done = (next - prev).norm() <= CONTOUR_TOL * next.norm().max(1.0);
        prev = next;
        if done {
            break;
        }
    }
    let first = adaptive(start, |n1| double_term(&c1, &c2, n1, n2))?;
    let s = kurtosis_integral(&c1, start)?;
    Ok(first.re + (ks.delta1 * sp.y1 + ks.delta2 * sp.y2) * s * s)
}

/// Numeric variance of the truncated sum (the σ² of the null law).
pub fn contour_variance(sp: &SpectralParams, ks: KurtosisSpec, cc: &ContourConfig) -> Result<f64> {
    cc.validate()?;
    let r2 = second_radius(sp, cc);
    let mut values = Vec::with_capacity(cc.extrapolation);
    for (k, r1) in ladder(sp, cc).into_iter().enumerate() {
        let r1 = r1.min(1.0 + (r2 - 1.0) / 2.0);
        values.push(variance_at(sp, ks, r1, r2, cc.nodes << k)?);
    }
    Ok(richardson(&values))
}

/// One closed-form versus numeric comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub target: String,
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub closed_form: f64,
    pub numeric: f64,
    pub abs_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub error: Option<String>,
}

impl OracleReport {
    fn compare(target: String, (n1, n2, p): (usize, usize, usize), closed: f64, numeric: Result<f64>, tol: f64) -> Self {
        match numeric {
            Ok(v) => {
                let abs_error = (closed - v).abs();
                Self {
                    target,
                    n1,
                    n2,
                    p,
                    closed_form: closed,
                    numeric: v,
                    abs_error,
                    tolerance: tol,
                    pass: abs_error <= tol,
                    error: None,
                }
            }
            Err(e) => Self {
                target,
                n1,
                n2,
                p,
                closed_form: closed,
                numeric: f64::NAN,
                abs_error: f64::NAN,
                tolerance: tol,
                pass: false,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub ell: f64,
    pub mu: f64,
    pub sigma2: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ell: 1e-8,
            mu: 1e-5,
            sigma2: 1e-5,
        }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            ell: tol,
            mu: tol,
            sigma2: tol,
        }
    }
}

/// One row of the verification grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub kurtosis: KurtosisSpec,
}

/// Twelve triples, three per regime (i)–(iv), each with a non-Gaussian
/// kurtosis pair so that μ and the kurtosis part of σ² are exercised.
pub fn default_grid() -> Vec<GridPoint> {
    let ks = KurtosisSpec {
        delta1: -1.2,
        delta2: 0.6,
    };
    [
        (45, 40, 50),
        (90, 80, 100),
        (180, 160, 200),
        (36, 50, 45),
        (72, 100, 90),
        (144, 200, 180),
        (50, 36, 45),
        (100, 72, 90),
        (200, 144, 180),
        (50, 50, 45),
        (100, 100, 90),
        (200, 200, 180),
    ]
    .into_iter()
    .map(|(n1, n2, p)| GridPoint { n1, n2, p, kurtosis: ks })
    .collect()
}

/// ℓ₁, ℓ₂ by quadrature and μ, σ² by contour integration for each point.
pub fn verify_grid(grid: &[GridPoint], tol: Tolerances, cc: &ContourConfig) -> Result<Vec<OracleReport>> {
    cc.validate()?;
    let mut out = Vec::new();
    for g in grid {
        let key = (g.n1, g.n2, g.p);
        let sp = spectral_params(g.n1, g.n2, g.p)?;
        let law = mean_variance(&sp, g.kurtosis)?;
        let (ell1, ell2) = centering_terms(&sp);
        out.push(OracleReport::compare("ell1".into(), key, ell1, quad_lsd_moment(&sp, LsdMoment::X), tol.ell));
        out.push(OracleReport::compare(
            "ell2".into(),
            key,
            ell2,
            quad_lsd_moment(&sp, LsdMoment::OneMinusX),
            tol.ell,
        ));
        out.push(OracleReport::compare("mu".into(), key, law.mu, contour_mean(&sp, g.kurtosis, cc), tol.mu));
        out.push(OracleReport::compare(
            "sigma2".into(),
            key,
            law.sigma2,
            contour_variance(&sp, g.kurtosis, cc),
            tol.sigma2,
        ));
    }
    Ok(out)
}

/// Monte Carlo mean and variance of p₁ − pℓ₁ with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub reps: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub mu: f64,
    pub sigma2: f64,
}

pub fn mc_moments(
    n1: usize,
    n2: usize,
    p: usize,
    distribution: Distribution,
    reps: usize,
    seed: u64,
) -> Result<MomentReport> {
    if reps < 500 {
        return Err(Error::InvalidConfig(format!("moment checks need at least 500 reps, got {reps}")));
    }
    let sc = Scenario {
        case_id: 0,
        n1,
        n2,
        p,
        a: 0.0,
        distribution,
        structure: SigmaStructure::Identity,
    };
    sc.validate()?;
    let law = sc.null_law()?;
    let mlrt = MlrtConfig::likelihood_weights(n1, n2);
    let cell = mix_words(&[n1 as u64, n2 as u64, p as u64]);
    let reps_out = replicate_statistics(&sc, reps, seed, cell, Purpose::Moments, CenteringMode::KnownZeroMean, &law, &mlrt);
    if reps_out.failures > 0 {
        return Err(Error::TooManyFailures {
            failed: reps_out.failures,
            reps,
            last: reps_out.last_error.map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    let pl1 = p as f64 * law.ell1;
    let xs: Vec<f64> = reps_out.values.iter().map(|v| v.sums.p1 - pl1).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let variance = m2 * n / (n - 1.0);
    Ok(MomentReport {
        reps: xs.len(),
        mean,
        mean_se: (variance / n).sqrt(),
        variance,
        variance_se: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        mu: law.mu,
        sigma2: law.sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_removes_linear_and_quadratic_error() {
        let f = |d: f64| 2.0 + 3.0 * d - 5.0 * d * d;
        let v: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&d| f(d)).collect();
        assert!((richardson(&v) - 2.0).abs() < 1e-12);
        assert_eq!(richardson(&[4.0]), 4.0);
    }

    #[test]
    fn config_validation() {
        assert!(ContourConfig::default().validate().is_ok());
        let bad = ContourConfig { nodes: 1000, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ContourConfig { r: 1.6, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ContourConfig { r2: 1.6, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn outer_singularity_matches_closed_modulus() {
        for &(n1, n2, p) in &[(90, 80, 100), (36, 50, 45), (50, 36, 45), (100, 100, 90)] {
            let sp = spectral_params(n1, n2, p).unwrap();
            let want = (sp.y2 / sp.h).max(sp.h / sp.y2);
            assert!((outer_singularity_radius(&sp) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn contour_on_a_singularity_is_rejected() {
        let sp = spectral_params(90, 80, 100).unwrap();
        let outer = outer_singularity_radius(&sp);
        assert!(matches!(Contour::new(&sp, outer), Err(Error::PoleProximity { .. })));
        assert!(matches!(Contour::new(&sp, 1.0), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn unit_mass_when_both_ratios_below_one() {
        let sp = spectral_params(200, 150, 100).unwrap();
        assert!((quad_lsd_moment(&sp, LsdMoment::One).unwrap() - 1.0).abs() < 1e-9);
    }
}
