//! `covtest`: two-sample covariance equality test, simulation tables,
//! null-law parameters and oracle verification.

mod ingest;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use covtest::engine::{run_test, Decision, MlrtConfig, Sidedness, StatisticValues, TestOptions, TruncatedSums};
use covtest::null_law::{mean_variance, spectral_params, KurtosisSpec, NullLaw, SpectralParams};
use covtest::oracle::{default_grid, verify_grid, ContourConfig, GridPoint, OracleReport, Tolerances};
use covtest::sim::{
    reference_p_values, run_cell, run_table, size_grid, Calibration, PowerTable, Scenario, SimConfig, TableConfig,
};
use covtest::{CenteringMode, Error, DEFAULT_CLAMP_EPS};

use ingest::{parse_delimiter, read_observations, CsvFormat};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_REJECT: u8 = 2;
const EXIT_VERIFY_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "covtest", version, about = "Invariant trace test for equality of two covariance matrices")]
struct Cli {
    /// Worker threads for simulations (default: all cores).
    #[arg(long, global = true, env = "COVTEST_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test H0: Σ₁ = Σ₂ on two CSV samples; prints a JSON report.
    Test(TestArgs),
    /// Simulate one table cell; prints a JSON cell result.
    Simulate(SimulateArgs),
    /// Reproduce a size/power table as CSV.
    Table(TableArgs),
    /// Print the null-law parameters for given sizes as JSON.
    Params(ParamsArgs),
    /// Compare closed forms against numerical oracles.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CenteringArg {
    SampleMean,
    KnownZeroMean,
}

impl From<CenteringArg> for CenteringMode {
    fn from(c: CenteringArg) -> Self {
        match c {
            CenteringArg::SampleMean => CenteringMode::SampleMean,
            CenteringArg::KnownZeroMean => CenteringMode::KnownZeroMean,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SidednessArg {
    TwoSided,
    Upper,
}

#[derive(Copy, Clone, Debug, ValueEnum, PartialEq)]
enum CalibrationArg {
    Asymptotic,
    Empirical,
}

impl From<CalibrationArg> for Calibration {
    fn from(c: CalibrationArg) -> Self {
        match c {
            CalibrationArg::Asymptotic => Calibration::Asymptotic,
            CalibrationArg::Empirical => Calibration::EmpiricalQuantile,
        }
    }
}

#[derive(Args, Debug)]
struct TestArgs {
    /// First sample (rows = observations).
    file1: PathBuf,
    /// Second sample.
    file2: PathBuf,
    /// Files have no header row.
    #[arg(long)]
    no_header: bool,
    /// Field delimiter (single character, or \t).
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// Rows are variables and columns are observations.
    #[arg(long)]
    transpose: bool,
    #[arg(long, value_enum, default_value = "sample-mean")]
    centering: CenteringArg,
    /// Excess kurtosis of population 1; estimated when omitted.
    #[arg(long, allow_hyphen_values = true, requires = "delta2")]
    delta1: Option<f64>,
    /// Excess kurtosis of population 2.
    #[arg(long, allow_hyphen_values = true, requires = "delta1")]
    delta2: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, value_enum, default_value = "two-sided")]
    sidedness: SidednessArg,
    /// Weight c₁ of L (default n₁/(n₁+n₂)).
    #[arg(long, allow_hyphen_values = true, requires = "c2")]
    c1: Option<f64>,
    /// Weight c₂ of L (default n₂/(n₁+n₂)).
    #[arg(long, allow_hyphen_values = true, requires = "c1")]
    c2: Option<f64>,
    /// Tolerance for classifying eigenvalues as 0 or 1.
    #[arg(long, default_value_t = DEFAULT_CLAMP_EPS)]
    eps: f64,
    /// `empirical` adds Monte Carlo p-values from Gaussian null draws.
    #[arg(long, value_enum, default_value = "asymptotic")]
    calibration: CalibrationArg,
    /// Null replicates for empirical calibration.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Case 1-4.
    #[arg(long)]
    case: u8,
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long)]
    p: usize,
    /// Alternative constant: Σ₁ = (1 + a/n₁)Σ₂.
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, value_enum, default_value = "empirical")]
    calibration: CalibrationArg,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// Case 1-4.
    #[arg(long)]
    case: u8,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Two smallest size groups per regime.
    #[arg(long, conflicts_with_all = ["full", "groups", "size"])]
    desk: bool,
    /// All four size groups per regime (includes p = 360/400).
    #[arg(long, conflicts_with_all = ["groups", "size"])]
    full: bool,
    /// First k size groups per regime (default 1).
    #[arg(long, conflicts_with = "size")]
    groups: Option<usize>,
    /// Explicit size triple n1,n2,p (repeatable).
    #[arg(long, value_parser = parse_triple)]
    size: Vec<(usize, usize, usize)>,
    /// Comma-separated a-values.
    #[arg(long, value_delimiter = ',', default_value = "0,3,7,10")]
    a_grid: Vec<f64>,
    #[arg(long, value_enum, default_value = "empirical")]
    calibration: CalibrationArg,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full table as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Also write a long-format power-curve CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ParamsArgs {
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta2: f64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// One tolerance for every check.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, conflicts_with = "tol")]
    tol_ell: Option<f64>,
    #[arg(long, conflicts_with = "tol")]
    tol_mu: Option<f64>,
    #[arg(long, conflicts_with = "tol")]
    tol_sigma2: Option<f64>,
    /// CSV with header n1,n2,p and optional delta1,delta2.
    #[arg(long)]
    grid_file: Option<PathBuf>,
    /// Starting trapezoid nodes (power of two, >= 512).
    #[arg(long, default_value_t = 2048)]
    nodes: usize,
    /// Print reports as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn parse_triple(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected n1,n2,p, got {s:?}"));
    }
    let n = |t: &str| t.parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((n(parts[0])?, n(parts[1])?, n(parts[2])?))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn explain(err: Error) -> anyhow::Error {
    match err {
        Error::NotPositiveDefinite { .. } => anyhow!(
            "{err}; the pooled scatter must be invertible, which requires p < n1 + n2 \
             (p < n1 + n2 - 2 under sample-mean centering) and no collinear variables"
        ),
        other => other.into(),
    }
}

fn cmd_test(args: TestArgs) -> Result<u8> {
    let fmt = CsvFormat {
        header: !args.no_header,
        delimiter: args.delimiter,
        transpose: args.transpose,
    };
    let x1 = read_observations(&args.file1, fmt)?;
    let x2 = read_observations(&args.file2, fmt)?;
    if x1.dim() != x2.dim() {
        return Err(explain(Error::DimensionMismatch(format!(
            "{} has {} columns but {} has {}",
            args.file1.display(),
            x1.dim(),
            args.file2.display(),
            x2.dim()
        ))));
    }
    let kurtosis = match (args.delta1, args.delta2) {
        (Some(d1), Some(d2)) => Some(KurtosisSpec::new(d1, d2)?),
        _ => None,
    };
    let mlrt = match (args.c1, args.c2) {
        (Some(c1), Some(c2)) => Some(MlrtConfig::new(c1, c2)?),
        _ => None,
    };
    let opts = TestOptions {
        level: args.level,
        sidedness: match args.sidedness {
            SidednessArg::TwoSided => Sidedness::TwoSided,
            SidednessArg::Upper => Sidedness::Upper,
        },
        centering: args.centering.into(),
        kurtosis,
        mlrt,
        clamp_eps: args.eps,
        ..TestOptions::default()
    };
    let mut report = run_test(&x1, &x2, &opts).map_err(explain)?;
    if args.calibration == CalibrationArg::Empirical {
        let observed = StatisticValues {
            k: report.k,
            k_prime: report.k_prime,
            l: report.l,
            l_tilde: report.l_tilde,
            sums: TruncatedSums {
                p1: report.p1,
                p2: report.p2,
                count_zero: report.spectrum_summary.count_zero,
                count_one: report.spectrum_summary.count_one,
                p: report.spectrum_summary.p,
            },
        };
        report.empirical = Some(reference_p_values(
            &observed,
            x1.n_obs(),
            x2.n_obs(),
            x1.dim(),
            opts.centering,
            &report.null_law,
            &report.mlrt,
            args.reps,
            args.seed,
        )?);
    }
    for w in &report.warnings {
        warn(w);
    }
    print_json(&report)?;
    Ok(match report.decision {
        Decision::Accept => EXIT_OK,
        Decision::Reject => EXIT_REJECT,
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8> {
    let scenario = Scenario::case(args.case, args.n1, args.n2, args.p, args.a)?;
    let mut cfg = SimConfig::new(scenario, args.reps, args.seed);
    cfg.level = args.level;
    cfg.calibration = args.calibration.into();
    let cell = run_cell(&cfg)?;
    eprintln!("{} replicates in {:.2?}", cell.reps_completed, cell.elapsed);
    print_json(&cell)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CurveRow<'a> {
    case: u8,
    n1: usize,
    n2: usize,
    p: usize,
    a: f64,
    statistic: &'a str,
    calibration: &'a str,
    rate: f64,
}

fn write_table_csv<W: Write>(table: &PowerTable, w: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for row in table.rows() {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn write_curve_csv(table: &PowerTable, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut writer = csv::Writer::from_writer(file);
    for row in table.rows() {
        let name = row.statistic.name();
        for (calibration, rate) in [("asymptotic", row.rate), ("size-corrected", row.size_corrected_rate)] {
            if let Some(rate) = rate {
                writer.serialize(CurveRow {
                    case: row.case,
                    n1: row.n1,
                    n2: row.n2,
                    p: row.p,
                    a: row.a,
                    statistic: name,
                    calibration,
                    rate,
                })?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

fn cmd_table(args: TableArgs) -> Result<u8> {
    let sizes = if !args.size.is_empty() {
        args.size.clone()
    } else if args.full {
        size_grid(4)
    } else if args.desk {
        size_grid(2)
    } else {
        let g = args.groups.unwrap_or(1);
        if !(1..=4).contains(&g) {
            bail!("--groups must be between 1 and 4, got {g}");
        }
        size_grid(g)
    };
    // open outputs before the long computation so bad paths fail fast
    let out = args
        .out
        .as_ref()
        .map(|p| File::create(p).with_context(|| format!("cannot write {}", p.display())))
        .transpose()?;
    let json = args
        .json
        .as_ref()
        .map(|p| File::create(p).with_context(|| format!("cannot write {}", p.display())))
        .transpose()?;
    let mut cfg = TableConfig::new(args.case, sizes, args.a_grid.clone(), args.reps, args.seed);
    cfg.level = args.level;
    cfg.calibration = args.calibration.into();
    let table = run_table(&cfg)?;
    for f in &table.failures {
        warn(&format!("cell ({}, {}, {}) a = {} failed: {}", f.n1, f.n2, f.p, f.a, f.error));
    }
    match out {
        Some(f) => write_table_csv(&table, f)?,
        None => write_table_csv(&table, io::stdout().lock())?,
    }
    if let Some(f) = json {
        serde_json::to_writer_pretty(f, &table)?;
    }
    if let Some(path) = &args.curve {
        write_curve_csv(&table, path)?;
    }
    Ok(if table.cells.is_empty() { EXIT_ERROR } else { EXIT_OK })
}

#[derive(Serialize)]
struct ParamsReport {
    spectral_params: SpectralParams,
    kurtosis: KurtosisSpec,
    null_law: NullLaw,
    warnings: Vec<String>,
    version: &'static str,
}

fn cmd_params(args: ParamsArgs) -> Result<u8> {
    let sp = spectral_params(args.n1, args.n2, args.p)?;
    let ks = KurtosisSpec::new(args.delta1, args.delta2)?;
    let law = mean_variance(&sp, ks)?;
    for w in &sp.warnings {
        warn(w);
    }
    print_json(&ParamsReport {
        warnings: sp.warnings.clone(),
        spectral_params: sp,
        kurtosis: ks,
        null_law: law,
        version: env!("CARGO_PKG_VERSION"),
    })?;
    Ok(EXIT_OK)
}

fn read_grid(path: &Path) -> Result<Vec<GridPoint>> {
    #[derive(serde::Deserialize)]
    struct Row {
        n1: usize,
        n2: usize,
        p: usize,
        delta1: Option<f64>,
        delta2: Option<f64>,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let fallback = default_grid()[0].kurtosis;
    let mut grid = Vec::new();
    for row in reader.deserialize() {
        let row: Row = row.with_context(|| format!("{}: bad grid row", path.display()))?;
        grid.push(GridPoint {
            n1: row.n1,
            n2: row.n2,
            p: row.p,
            kurtosis: KurtosisSpec::new(
                row.delta1.unwrap_or(fallback.delta1),
                row.delta2.unwrap_or(fallback.delta2),
            )?,
        });
    }
    if grid.is_empty() {
        bail!("{}: grid file has no rows", path.display());
    }
    Ok(grid)
}

fn print_reports(reports: &[OracleReport]) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<8} {:>5} {:>5} {:>5} {:>20} {:>20} {:>10} {:>8}  status",
        "target", "n1", "n2", "p", "closed_form", "numeric", "abs_error", "tol"
    )?;
    for r in reports {
        let status = match (&r.error, r.pass) {
            (Some(e), _) => format!("ERROR {e}"),
            (None, true) => "pass".into(),
            (None, false) => "FAIL".into(),
        };
        writeln!(
            out,
            "{:<8} {:>5} {:>5} {:>5} {:>20.12e} {:>20.12e} {:>10.2e} {:>8.0e}  {status}",
            r.target, r.n1, r.n2, r.p, r.closed_form, r.numeric, r.abs_error, r.tolerance
        )?;
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    writeln!(out, "{} checks, {} failed", reports.len(), failed)?;
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let tol = match args.tol {
        Some(t) => Tolerances::uniform(t),
        None => {
            let d = Tolerances::default();
            Tolerances {
                ell: args.tol_ell.unwrap_or(d.ell),
                mu: args.tol_mu.unwrap_or(d.mu),
                sigma2: args.tol_sigma2.unwrap_or(d.sigma2),
            }
        }
    };
    let grid = match &args.grid_file {
        Some(p) => read_grid(p)?,
        None => default_grid(),
    };
    let cc = ContourConfig {
        nodes: args.nodes,
        ..ContourConfig::default()
    };
    let reports = verify_grid(&grid, tol, &cc)?;
    if args.json {
        print_json(&reports)?;
    } else {
        print_reports(&reports)?;
    }
    Ok(if reports.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Table(a) => cmd_table(a),
        Command::Params(a) => cmd_params(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
