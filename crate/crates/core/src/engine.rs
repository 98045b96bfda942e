//! The standardized trace statistics K, K′, the mLRT competitors L and L̃,
//! normal p-values and the end-to-end two-sample pipeline.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::SQRT_2;

use crate::beta::{beta_spectrum_with, BetaSpectrum, DEFAULT_CLAMP_EPS};
use crate::eigen::EigenMethod;
use crate::error::{Error, Result};
use crate::matrix::{scatter, CenteringMode, ObservationMatrix};
use crate::null_law::{mean_variance, spectral_params, KurtosisSpec, NullLaw, SpectralParams};

/// Absolute tolerance on p₁ + p₂ = p − #0 − #1.
pub const SUM_IDENTITY_TOL: f64 = 1e-10;

/// Σ λ over eigenvalues not classified as 1, and Σ (1 − λ) over those not
/// classified as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSums {
    pub p1: f64,
    pub p2: f64,
    pub count_zero: usize,
    pub count_one: usize,
    pub p: usize,
}

impl TruncatedSums {
    /// Deviation of p₁ + p₂ from p − #0 − #1.
    pub fn identity_residual(&self) -> f64 {
        self.p1 + self.p2 - (self.p - self.count_zero - self.count_one) as f64
    }
}

pub fn truncated_sums(spec: &BetaSpectrum) -> TruncatedSums {
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    for &v in spec.eigenvalues() {
        if !spec.is_one(v) {
            p1 += v;
        }
        if !spec.is_zero(v) {
            p2 += 1.0 - v;
        }
    }
    TruncatedSums {
        p1,
        p2,
        count_zero: spec.count_zero(),
        count_one: spec.count_one(),
        p: spec.dim(),
    }
}

/// K = (p₁ − pℓ₁ − μ)/σ and K′ = (p₂ − pℓ₂ + μ)/σ.
pub fn k_statistics(ts: &TruncatedSums, law: &NullLaw, p: usize) -> Result<(f64, f64)> {
    if !(law.sigma2 > 0.0) {
        return Err(Error::NonPositiveVariance(law.sigma2));
    }
    let sigma = law.sigma();
    let pf = p as f64;
    let k = (ts.p1 - pf * law.ell1 - law.mu) / sigma;
    let k_prime = (ts.p2 - pf * law.ell2 + law.mu) / sigma;
    Ok((k, k_prime))
}

/// Weights of the L statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlrtConfig {
    pub c1: f64,
    pub c2: f64,
}

impl MlrtConfig {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(c1.is_finite() && c2.is_finite()) {
            return Err(Error::InvalidConfig(format!("mLRT weights must be finite, got ({c1}, {c2})")));
        }
        Ok(Self { c1, c2 })
    }

    /// c₁ = n₁/(n₁+n₂), c₂ = n₂/(n₁+n₂).
    pub fn likelihood_weights(n1: usize, n2: usize) -> Self {
        let total = (n1 + n2) as f64;
        Self {
            c1: n1 as f64 / total,
            c2: n2 as f64 / total,
        }
    }
}

/// (L, L̃) summed over eigenvalues strictly inside (0, 1).
pub fn mlrt_statistics(spec: &BetaSpectrum, cfg: &MlrtConfig) -> Result<(f64, f64)> {
    let mut l = 0.0;
    let mut l_tilde = 0.0;
    let mut any = false;
    for v in spec.interior() {
        any = true;
        let (a, b) = (v.ln(), (-v).ln_1p());
        l += cfg.c1 * a + cfg.c2 * b;
        l_tilde += a;
    }
    if !any {
        return Err(Error::EmptyInterior);
    }
    Ok((l, l_tilde))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

/// 1 − Φ(x).
pub fn normal_upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Normal p-value for K; rejects iff p < α.
pub fn decide(k: f64, level: f64, sidedness: Sidedness) -> Result<(f64, Decision)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("level {level} outside (0, 1)")));
    }
    if k.is_nan() {
        return Err(Error::InvalidConfig("statistic is NaN".into()));
    }
    let p = match sidedness {
        Sidedness::TwoSided => erfc(k.abs() / SQRT_2),
        Sidedness::Upper => normal_upper_tail(k),
    }
    .clamp(0.0, 1.0);
    let decision = if p < level { Decision::Reject } else { Decision::Accept };
    Ok((p, decision))
}

/// All statistics computed from one shared spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticValues {
    pub k: f64,
    pub k_prime: f64,
    pub l: f64,
    pub l_tilde: f64,
    pub sums: TruncatedSums,
}

pub fn evaluate(spec: &BetaSpectrum, law: &NullLaw, mlrt: &MlrtConfig) -> Result<StatisticValues> {
    let sums = truncated_sums(spec);
    let (k, k_prime) = k_statistics(&sums, law, spec.dim())?;
    let (l, l_tilde) = mlrt_statistics(spec, mlrt)?;
    Ok(StatisticValues {
        k,
        k_prime,
        l,
        l_tilde,
        sums,
    })
}

/// Mean over columns of the excess kurtosis m₄/m₂² − 3, after centering each
/// column according to `centering`. Constant columns are skipped.
pub fn estimate_excess_kurtosis(x: &ObservationMatrix, centering: CenteringMode) -> f64 {
    let n = x.n_obs() as f64;
    let means = match centering {
        CenteringMode::SampleMean => x.column_means(),
        CenteringMode::KnownZeroMean => vec![0.0; x.dim()],
    };
    let mut total = 0.0;
    let mut used = 0usize;
    for (j, &mean) in means.iter().enumerate() {
        let (mut m2, mut m4) = (0.0, 0.0);
        for i in 0..x.n_obs() {
            let d = x.values()[(i, j)] - mean;
            let d2 = d * d;
            m2 += d2;
            m4 += d2 * d2;
        }
        m2 /= n;
        m4 /= n;
        if m2 > 0.0 {
            total += m4 / (m2 * m2) - 3.0;
            used += 1;
        }
    }
    if used == 0 {
        0.0
    } else {
        (total / used as f64).max(-2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub level: f64,
    pub sidedness: Sidedness,
    pub centering: CenteringMode,
    /// None estimates Δ₁, Δ₂ from the data.
    pub kurtosis: Option<KurtosisSpec>,
    /// None uses the likelihood weights.
    pub mlrt: Option<MlrtConfig>,
    pub clamp_eps: f64,
    pub eigen_method: EigenMethod,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            level: 0.05,
            sidedness: Sidedness::TwoSided,
            centering: CenteringMode::SampleMean,
            kurtosis: None,
            mlrt: None,
            clamp_eps: DEFAULT_CLAMP_EPS,
            eigen_method: EigenMethod::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub p: usize,
    pub count_zero: usize,
    pub count_one: usize,
    pub count_interior: usize,
    pub min: f64,
    pub max: f64,
    pub clamp_tolerance: f64,
}

impl From<&BetaSpectrum> for SpectrumSummary {
    fn from(s: &BetaSpectrum) -> Self {
        Self {
            p: s.dim(),
            count_zero: s.count_zero(),
            count_one: s.count_one(),
            count_interior: s.count_interior(),
            min: s.min(),
            max: s.max(),
            clamp_tolerance: s.clamp_tolerance(),
        }
    }
}

/// Monte Carlo p-values against a simulated null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPValues {
    pub reps: usize,
    pub seed: u64,
    pub k: f64,
    pub l: f64,
    pub l_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub k: f64,
    pub k_prime: f64,
    pub l: f64,
    pub l_tilde: f64,
    pub p1: f64,
    pub p2: f64,
    pub p_value_k: f64,
    pub decision: Decision,
    pub level: f64,
    pub sidedness: Sidedness,
    pub centering: CenteringMode,
    pub kurtosis: KurtosisSpec,
    pub kurtosis_estimated: bool,
    pub mlrt: MlrtConfig,
    pub null_law: NullLaw,
    pub spectral_params: SpectralParams,
    pub spectrum_summary: SpectrumSummary,
    pub empirical: Option<EmpiricalPValues>,
    pub warnings: Vec<String>,
    pub version: String,
}

/// Scatter → spectrum → null law → statistics → decision.
///
/// Under sample-mean centering the null law is evaluated at n_l − 1.
pub fn run_test(x1: &ObservationMatrix, x2: &ObservationMatrix, opts: &TestOptions) -> Result<TestReport> {
    if x1.dim() != x2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "samples have {} and {} variables",
            x1.dim(),
            x2.dim()
        )));
    }
    let a1 = scatter(x1, opts.centering)?;
    let a2 = scatter(x2, opts.centering)?;
    let sp = spectral_params(a1.degrees_of_freedom(), a2.degrees_of_freedom(), x1.dim())?;
    let mut warnings = sp.warnings.clone();

    let (kurtosis, kurtosis_estimated) = match opts.kurtosis {
        Some(ks) => (KurtosisSpec::new(ks.delta1, ks.delta2)?, false),
        None => {
            let ks = KurtosisSpec::new(
                estimate_excess_kurtosis(x1, opts.centering),
                estimate_excess_kurtosis(x2, opts.centering),
            )?;
            warnings.push(format!(
                "estimated_kurtosis: delta1 = {:.4}, delta2 = {:.4} estimated as mean marginal excess kurtosis",
                ks.delta1, ks.delta2
            ));
            (ks, true)
        }
    };
    let law = mean_variance(&sp, kurtosis)?;
    let mlrt = opts.mlrt.unwrap_or_else(|| MlrtConfig::likelihood_weights(sp.n1, sp.n2));

    let spectrum = beta_spectrum_with(&a1, &a2, opts.clamp_eps, opts.eigen_method)?;
    warnings.extend(spectrum.warnings().iter().cloned());
    let stats = evaluate(&spectrum, &law, &mlrt)?;
    if stats.sums.identity_residual().abs() > SUM_IDENTITY_TOL {
        warnings.push(format!(
            "truncated sums miss p - #0 - #1 by {:e}",
            stats.sums.identity_residual()
        ));
    }
    let (p_value_k, decision) = decide(stats.k, opts.level, opts.sidedness)?;

    Ok(TestReport {
        k: stats.k,
        k_prime: stats.k_prime,
        l: stats.l,
        l_tilde: stats.l_tilde,
        p1: stats.sums.p1,
        p2: stats.sums.p2,
        p_value_k,
        decision,
        level: opts.level,
        sidedness: opts.sidedness,
        centering: opts.centering,
        kurtosis,
        kurtosis_estimated,
        mlrt,
        null_law: law,
        spectral_params: sp,
        spectrum_summary: SpectrumSummary::from(&spectrum),
        empirical: None,
        warnings,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}
