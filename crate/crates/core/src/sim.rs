//! Monte Carlo harness: scenario generation, replication loops, empirical
//! size and power, and size-corrected power from paired null sweeps.
//!
//! Each replicate owns a keyed stream (see [`crate::rng`]) and results are
//! aggregated by counting, so output does not depend on the thread count.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::{beta_spectrum, DEFAULT_CLAMP_EPS};
use crate::engine::{decide, evaluate, EmpiricalPValues, MlrtConfig, Sidedness, StatisticValues};
use crate::error::{Error, Result};
use crate::matrix::{scatter, CenteringMode, Matrix, ObservationMatrix};
use crate::null_law::{mean_variance, spectral_params, KurtosisSpec, NullLaw, Regime};
use crate::rng::{mix_words, Purpose, RandomStream, StreamKey};

/// Replicates allowed to fail numerically before a cell is abandoned.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    StandardNormal,
    /// Uniform on (−√3, √3).
    Uniform,
}

impl Distribution {
    /// Excess kurtosis Δ = E x⁴ − 3.
    pub fn excess_kurtosis(self) -> f64 {
        match self {
            Distribution::StandardNormal => 0.0,
            Distribution::Uniform => -1.2,
        }
    }

    fn draw(self, s: &mut RandomStream) -> f64 {
        match self {
            Distribution::StandardNormal => s.normal(),
            Distribution::Uniform => s.uniform_unit_variance(),
        }
    }
}

/// Population covariance Σ₂ of the second sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaStructure {
    Identity,
    /// diag(p², 1, …, 1)
    SpikeDiag,
    /// 0.5·I + 0.5·J
    Equicorrelated,
}

/// Coefficients (a, b) with (aI + bJ)² = 0.5I + 0.5J in dimension p.
fn equicorrelated_root(p: usize) -> (f64, f64) {
    let a = 0.5f64.sqrt();
    let b = ((0.5 + 0.5 * p as f64).sqrt() - a) / p as f64;
    (a, b)
}

/// Symmetric square root of Σ for the given structure.
pub fn sigma_sqrt(structure: SigmaStructure, p: usize) -> Result<Matrix> {
    if p < 2 {
        return Err(Error::DimensionTooSmall(p));
    }
    Ok(match structure {
        SigmaStructure::Identity => Matrix::identity(p),
        SigmaStructure::SpikeDiag => {
            let mut d = vec![1.0; p];
            d[0] = p as f64;
            Matrix::from_diag(&d)
        }
        SigmaStructure::Equicorrelated => {
            let (a, b) = equicorrelated_root(p);
            let mut m = Matrix::identity(p).scale(a);
            for i in 0..p {
                for j in 0..p {
                    m[(i, j)] += b;
                }
            }
            m
        }
    })
}

/// Σ = Σ^{1/2}·Σ^{1/2}.
pub fn sigma(structure: SigmaStructure, p: usize) -> Result<Matrix> {
    let r = sigma_sqrt(structure, p)?;
    r.matmul(&r)
}

/// Applies Σ^{1/2} to one row in place without forming the matrix.
fn apply_root(structure: SigmaStructure, row: &mut [f64]) {
    match structure {
        SigmaStructure::Identity => {}
        SigmaStructure::SpikeDiag => row[0] *= row.len() as f64,
        SigmaStructure::Equicorrelated => {
            let (a, b) = equicorrelated_root(row.len());
            let shift = b * row.iter().sum::<f64>();
            for v in row.iter_mut() {
                *v = a * *v + shift;
            }
        }
    }
}

/// One simulation setting: Σ₁ = (1 + a/n₁)Σ₂, zero means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub case_id: u8,
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub a: f64,
    pub distribution: Distribution,
    pub structure: SigmaStructure,
}

impl Scenario {
    /// Case 1: normal, Σ₂ = I. Case 2: uniform, I. Case 3: uniform,
    /// diag(p², 1, …). Case 4: uniform, 0.5I + 0.5J.
    pub fn case(case_id: u8, n1: usize, n2: usize, p: usize, a: f64) -> Result<Self> {
        let (distribution, structure) = match case_id {
            1 => (Distribution::StandardNormal, SigmaStructure::Identity),
            2 => (Distribution::Uniform, SigmaStructure::Identity),
            3 => (Distribution::Uniform, SigmaStructure::SpikeDiag),
            4 => (Distribution::Uniform, SigmaStructure::Equicorrelated),
            other => return Err(Error::InvalidConfig(format!("unknown case {other}, expected 1-4"))),
        };
        let sc = Self {
            case_id,
            n1,
            n2,
            p,
            a,
            distribution,
            structure,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidConfig(format!("alternative constant a = {} must be >= 0", self.a)));
        }
        spectral_params(self.n1, self.n2, self.p).map(|_| ())
    }

    pub fn kurtosis(&self) -> KurtosisSpec {
        let d = self.distribution.excess_kurtosis();
        KurtosisSpec {
            delta1: d,
            delta2: d,
        }
    }

    pub fn with_a(&self, a: f64) -> Self {
        Self { a, ..*self }
    }

    /// Scale of sample 1 relative to sample 2.
    pub fn inflation(&self) -> f64 {
        (1.0 + self.a / self.n1 as f64).sqrt()
    }

    pub fn regime(&self) -> Regime {
        Regime::classify(self.p as f64 / self.n1 as f64, self.p as f64 / self.n2 as f64)
    }

    pub fn null_law(&self) -> Result<NullLaw> {
        mean_variance(&spectral_params(self.n1, self.n2, self.p)?, self.kurtosis())
    }

    fn size_key(&self) -> u64 {
        mix_words(&[self.n1 as u64, self.n2 as u64, self.p as u64])
    }

    fn cell_key(&self) -> u64 {
        mix_words(&[self.n1 as u64, self.n2 as u64, self.p as u64, self.a.to_bits()])
    }
}

/// Draws (sample 1, sample 2). Sample 1 is drawn first, row by row.
pub fn draw_dataset(sc: &Scenario, stream: &mut RandomStream) -> Result<(ObservationMatrix, ObservationMatrix)> {
    let draw = |n: usize, scale: f64, s: &mut RandomStream| -> Result<ObservationMatrix> {
        let mut m = Matrix::zeros(n, sc.p);
        for i in 0..n {
            let row = m.row_mut(i);
            for v in row.iter_mut() {
                *v = sc.distribution.draw(s);
            }
            apply_root(sc.structure, row);
            if scale != 1.0 {
                for v in row.iter_mut() {
                    *v *= scale;
                }
            }
        }
        ObservationMatrix::new(m)
    };
    let x1 = draw(sc.n1, sc.inflation(), stream)?;
    let x2 = draw(sc.n2, 1.0, stream)?;
    Ok((x1, x2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatisticKind {
    K,
    L,
    #[serde(rename = "L_tilde")]
    LTilde,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 3] = [StatisticKind::K, StatisticKind::L, StatisticKind::LTilde];

    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::K => "K",
            StatisticKind::L => "L",
            StatisticKind::LTilde => "L_tilde",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(StatisticKind::K),
            "L" | "l" => Ok(StatisticKind::L),
            "L_tilde" | "l_tilde" | "Lt" => Ok(StatisticKind::LTilde),
            other => Err(Error::InvalidConfig(format!("unknown statistic {other}"))),
        }
    }

    fn value(self, v: &StatisticValues) -> f64 {
        match self {
            StatisticKind::K => v.k,
            StatisticKind::L => v.l,
            StatisticKind::LTilde => v.l_tilde,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Calibration {
    Asymptotic,
    /// Asymptotic rates plus size-corrected rates from a paired null sweep.
    #[default]
    EmpiricalQuantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub reps: usize,
    pub seed: u64,
    pub level: f64,
    pub statistics: Vec<StatisticKind>,
    pub calibration: Calibration,
}

impl SimConfig {
    pub fn new(scenario: Scenario, reps: usize, seed: u64) -> Self {
        Self {
            scenario,
            reps,
            seed,
            level: 0.05,
            statistics: StatisticKind::ALL.to_vec(),
            calibration: Calibration::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!("level {} outside (0, 1)", self.level)));
        }
        if self.statistics.is_empty() {
            return Err(Error::InvalidConfig("no statistics requested".into()));
        }
        self.scenario.validate()
    }
}

/// Statistic values of every completed replicate plus the failure count.
#[derive(Debug, Clone)]
pub struct Replicates {
    pub values: Vec<StatisticValues>,
    pub failures: usize,
    pub last_error: Option<Error>,
}

impl Replicates {
    fn check(&self, reps: usize) -> Result<()> {
        if self.failures as f64 > MAX_FAILURE_FRACTION * reps as f64 || self.values.is_empty() {
            return Err(Error::TooManyFailures {
                failed: self.failures,
                reps,
                last: self.last_error.as_ref().map(|e| e.to_string()).unwrap_or_default(),
            });
        }
        Ok(())
    }
}

fn one_replicate(
    sc: &Scenario,
    key: StreamKey,
    centering: CenteringMode,
    law: &NullLaw,
    mlrt: &MlrtConfig,
) -> Result<StatisticValues> {
    let mut stream = key.stream();
    let (x1, x2) = draw_dataset(sc, &mut stream)?;
    let a1 = scatter(&x1, centering)?;
    let a2 = scatter(&x2, centering)?;
    let spec = beta_spectrum(&a1, &a2, DEFAULT_CLAMP_EPS)?;
    evaluate(&spec, law, mlrt)
}

/// Runs `reps` replicates of `sc`; replicate i uses stream (seed, case, cell, purpose, i).
pub fn replicate_statistics(
    sc: &Scenario,
    reps: usize,
    seed: u64,
    cell: u64,
    purpose: Purpose,
    centering: CenteringMode,
    law: &NullLaw,
    mlrt: &MlrtConfig,
) -> Replicates {
    let results: Vec<Result<StatisticValues>> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let key = StreamKey::new(seed, sc.case_id as u64, cell, purpose, i);
            one_replicate(sc, key, centering, law, mlrt)
        })
        .collect();
    let mut values = Vec::with_capacity(reps);
    let mut failures = 0;
    let mut last_error = None;
    for r in results {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                failures += 1;
                last_error = Some(e);
            }
        }
    }
    Replicates {
        values,
        failures,
        last_error,
    }
}

/// Null statistics of the scenario's sizes (a = 0), shared by all a-values.
pub fn null_sweep(sc: &Scenario, reps: usize, seed: u64) -> Result<Replicates> {
    let null = sc.with_a(0.0);
    let law = null.null_law()?;
    let mlrt = MlrtConfig::likelihood_weights(sc.n1, sc.n2);
    let r = replicate_statistics(
        &null,
        reps,
        seed,
        null.size_key(),
        Purpose::NullSweep,
        CenteringMode::KnownZeroMean,
        &law,
        &mlrt,
    );
    r.check(reps)?;
    Ok(r)
}

/// Two-sided empirical critical value for one statistic from null draws:
/// K is compared through |K|, L and L̃ through |T − null mean|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub center: f64,
    pub threshold: f64,
}

impl CriticalValue {
    pub fn from_null(kind: StatisticKind, null: &[StatisticValues], level: f64) -> Self {
        let raw: Vec<f64> = null.iter().map(|v| kind.value(v)).collect();
        let center = match kind {
            StatisticKind::K => 0.0,
            _ => raw.iter().sum::<f64>() / raw.len() as f64,
        };
        let mut dev: Vec<f64> = raw.iter().map(|x| (x - center).abs()).collect();
        dev.sort_by(f64::total_cmp);
        let m = dev.len();
        let idx = (((1.0 - level) * m as f64).ceil() as usize).clamp(1, m) - 1;
        Self {
            center,
            threshold: dev[idx],
        }
    }

    pub fn rejects(&self, x: f64) -> bool {
        (x - self.center).abs() > self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticRate {
    pub statistic: StatisticKind,
    /// Rejection rate under the asymptotic N(0,1) calibration (K only).
    pub rate: Option<f64>,
    /// Rejection rate against the empirical null quantile.
    pub size_corrected_rate: Option<f64>,
    /// √(r(1−r)/reps) of the primary reported rate.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scenario: Scenario,
    pub regime: Regime,
    pub reps: usize,
    pub reps_completed: usize,
    pub failures: usize,
    pub seed: u64,
    pub rates: Vec<StatisticRate>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CellResult {
    pub fn rate(&self, kind: StatisticKind) -> Option<&StatisticRate> {
        self.rates.iter().find(|r| r.statistic == kind)
    }
}

fn binomial_se(r: f64, n: usize) -> f64 {
    (r * (1.0 - r) / n as f64).sqrt()
}

fn aggregate(cfg: &SimConfig, alt: &Replicates, null: Option<&Replicates>, started: Instant) -> Result<CellResult> {
    let sc = &cfg.scenario;
    let done = alt.values.len();
    let mut rates = Vec::new();
    for &kind in &cfg.statistics {
        let rate = if kind == StatisticKind::K {
            let mut rejects = 0usize;
            for v in &alt.values {
                if decide(v.k, cfg.level, Sidedness::TwoSided)?.1 == crate::engine::Decision::Reject {
                    rejects += 1;
                }
            }
            Some(rejects as f64 / done as f64)
        } else {
            None
        };
        let size_corrected_rate = null.map(|n| {
            let cv = CriticalValue::from_null(kind, &n.values, cfg.level);
            alt.values.iter().filter(|v| cv.rejects(kind.value(v))).count() as f64 / done as f64
        });
        let primary = rate.or(size_corrected_rate).unwrap_or(f64::NAN);
        rates.push(StatisticRate {
            statistic: kind,
            rate,
            size_corrected_rate,
            mc_se: binomial_se(primary, done),
        });
    }
    Ok(CellResult {
        scenario: *sc,
        regime: sc.regime(),
        reps: cfg.reps,
        reps_completed: done,
        failures: alt.failures,
        seed: cfg.seed,
        rates,
        elapsed: started.elapsed(),
    })
}

fn run_cell_with_null(cfg: &SimConfig, null: Option<&Replicates>) -> Result<CellResult> {
    cfg.validate()?;
    let started = Instant::now();
    let sc = &cfg.scenario;
    let owned;
    let alt = if let (true, Some(null)) = (sc.a == 0.0, null) {
        // the null sweep already is a = 0 data
        null
    } else {
        let law = sc.null_law()?;
        let mlrt = MlrtConfig::likelihood_weights(sc.n1, sc.n2);
        owned = replicate_statistics(
            sc,
            cfg.reps,
            cfg.seed,
            sc.cell_key(),
            Purpose::Alternative,
            CenteringMode::KnownZeroMean,
            &law,
            &mlrt,
        );
        owned.check(cfg.reps)?;
        &owned
    };
    aggregate(cfg, alt, null, started)
}

pub fn run_cell(cfg: &SimConfig) -> Result<CellResult> {
    cfg.validate()?;
    let null = match cfg.calibration {
        Calibration::Asymptotic => None,
        Calibration::EmpiricalQuantile => Some(null_sweep(&cfg.scenario, cfg.reps, cfg.seed)?),
    };
    run_cell_with_null(cfg, null.as_ref())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub case_id: u8,
    pub sizes: Vec<(usize, usize, usize)>,
    pub a_values: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub level: f64,
    pub calibration: Calibration,
}

impl TableConfig {
    pub fn new(case_id: u8, sizes: Vec<(usize, usize, usize)>, a_values: Vec<f64>, reps: usize, seed: u64) -> Self {
        Self {
            case_id,
            sizes,
            a_values,
            reps,
            seed,
            level: 0.05,
            calibration: Calibration::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub a: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub case_id: u8,
    pub seed: u64,
    pub reps: usize,
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
}

/// Flat record of one (cell, statistic) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub case: u8,
    pub regime: Regime,
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub a: f64,
    pub statistic: StatisticKind,
    pub rate: Option<f64>,
    pub size_corrected_rate: Option<f64>,
    pub mc_se: f64,
    pub reps: usize,
    pub seed: u64,
}

impl PowerTable {
    pub fn rows(&self) -> Vec<TableRow> {
        self.cells
            .iter()
            .flat_map(|c| {
                c.rates.iter().map(move |r| TableRow {
                    case: c.scenario.case_id,
                    regime: c.regime,
                    n1: c.scenario.n1,
                    n2: c.scenario.n2,
                    p: c.scenario.p,
                    a: c.scenario.a,
                    statistic: r.statistic,
                    rate: r.rate,
                    size_corrected_rate: r.size_corrected_rate,
                    mc_se: r.mc_se,
                    reps: c.reps_completed,
                    seed: c.seed,
                })
            })
            .collect()
    }

    pub fn cell(&self, n1: usize, n2: usize, p: usize, a: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| (c.scenario.n1, c.scenario.n2, c.scenario.p) == (n1, n2, p) && c.scenario.a == a)
    }
}

/// One cell per (sizes, a). The null sweep of each size triple is computed
/// once and shared by its a-values. Cells that fail are listed, not fatal.
pub fn run_table(cfg: &TableConfig) -> Result<PowerTable> {
    if cfg.sizes.is_empty() || cfg.a_values.is_empty() {
        return Err(Error::InvalidConfig("size and a grids must be nonempty".into()));
    }
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for &(n1, n2, p) in &cfg.sizes {
        let fail = |a: f64, e: &Error| CellFailure {
            n1,
            n2,
            p,
            a,
            error: e.to_string(),
        };
        let base = match Scenario::case(cfg.case_id, n1, n2, p, 0.0) {
            Ok(s) => s,
            Err(Error::InvalidConfig(m)) => return Err(Error::InvalidConfig(m)),
            Err(e) => {
                failures.extend(cfg.a_values.iter().map(|&a| fail(a, &e)));
                continue;
            }
        };
        let null = match cfg.calibration {
            Calibration::Asymptotic => None,
            Calibration::EmpiricalQuantile => match null_sweep(&base, cfg.reps, cfg.seed) {
                Ok(n) => Some(n),
                Err(e) => {
                    failures.extend(cfg.a_values.iter().map(|&a| fail(a, &e)));
                    continue;
                }
            },
        };
        for &a in &cfg.a_values {
            let sim = SimConfig {
                scenario: base.with_a(a),
                reps: cfg.reps,
                seed: cfg.seed,
                level: cfg.level,
                statistics: StatisticKind::ALL.to_vec(),
                calibration: cfg.calibration,
            };
            match run_cell_with_null(&sim, null.as_ref()) {
                Ok(c) => cells.push(c),
                Err(Error::InvalidConfig(m)) => return Err(Error::InvalidConfig(m)),
                Err(e) => failures.push(fail(a, &e)),
            }
        }
    }
    Ok(PowerTable {
        case_id: cfg.case_id,
        seed: cfg.seed,
        reps: cfg.reps,
        cells,
        failures,
    })
}

/// Empirical p-values of observed statistics against `reps` Gaussian null
/// datasets with the same sizes and centering; (1 + #exceed)/(reps + 1).
pub fn reference_p_values(
    observed: &StatisticValues,
    n1: usize,
    n2: usize,
    p: usize,
    centering: CenteringMode,
    law: &NullLaw,
    mlrt: &MlrtConfig,
    reps: usize,
    seed: u64,
) -> Result<EmpiricalPValues> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    let sc = Scenario {
        case_id: 0,
        n1,
        n2,
        p,
        a: 0.0,
        distribution: Distribution::StandardNormal,
        structure: SigmaStructure::Identity,
    };
    let cell = mix_words(&[n1 as u64, n2 as u64, p as u64]);
    let r = replicate_statistics(&sc, reps, seed, cell, Purpose::Reference, centering, law, mlrt);
    r.check(reps)?;
    let pv = |kind: StatisticKind| {
        let null: Vec<f64> = r.values.iter().map(|v| kind.value(v)).collect();
        let center = match kind {
            StatisticKind::K => 0.0,
            _ => null.iter().sum::<f64>() / null.len() as f64,
        };
        let obs = (kind.value(observed) - center).abs();
        let exceed = null.iter().filter(|x| (*x - center).abs() >= obs).count();
        (1 + exceed) as f64 / (null.len() + 1) as f64
    };
    Ok(EmpiricalPValues {
        reps: r.values.len(),
        seed,
        k: pv(StatisticKind::K),
        l: pv(StatisticKind::L),
        l_tilde: pv(StatisticKind::LTilde),
    })
}

/// The standard size grids, one list per regime (i)–(iv), smallest first.
pub fn regime_size_groups() -> [[(usize, usize, usize); 4]; 4] {
    [
        [(45, 40, 50), (90, 80, 100), (180, 160, 200), (360, 320, 400)],
        [(36, 50, 45), (72, 100, 90), (144, 200, 180), (288, 400, 360)],
        [(50, 36, 45), (100, 72, 90), (200, 144, 180), (400, 288, 360)],
        [(50, 50, 45), (100, 100, 90), (200, 200, 180), (400, 400, 360)],
    ]
}

/// The first `groups` size triples of every regime, ordered by regime.
pub fn size_grid(groups: usize) -> Vec<(usize, usize, usize)> {
    regime_size_groups()
        .iter()
        .flat_map(|r| r.iter().take(groups.min(4)).copied())
        .collect()
}
