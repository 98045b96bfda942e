use covtest::engine::{mlrt_statistics, run_test, truncated_sums, Decision, MlrtConfig, TestOptions};
use covtest::rng::{Purpose, StreamKey};
use covtest::sim::{draw_dataset, replicate_statistics, Scenario};
use covtest::{
    beta_spectrum, scatter, CenteringMode, KurtosisSpec, Matrix, ObservationMatrix, DEFAULT_CLAMP_EPS,
};

fn gaussian(n: usize, p: usize, seed: u64) -> ObservationMatrix {
    let mut s = StreamKey::new(seed, 0, 2, Purpose::Auxiliary, 0).stream();
    ObservationMatrix::new(Matrix::from_vec(n, p, (0..n * p).map(|_| s.normal()).collect()).unwrap()).unwrap()
}

/// Neumaier-compensated sum.
fn compensated(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        c += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + c
}

#[test]
fn sums_and_mlrt_match_direct_summation() {
    let a1 = scatter(&gaussian(14, 10, 1), CenteringMode::KnownZeroMean).unwrap();
    let a2 = scatter(&gaussian(8, 10, 2), CenteringMode::KnownZeroMean).unwrap();
    let spec = beta_spectrum(&a1, &a2, DEFAULT_CLAMP_EPS).unwrap();
    assert_eq!(spec.count_one(), 2);
    let ts = truncated_sums(&spec);
    let ev = spec.eigenvalues();
    assert_eq!(ts.p1 + ts.p2, (10 - spec.count_zero() - spec.count_one()) as f64);

    let cfg = MlrtConfig::likelihood_weights(14, 8);
    let (l, lt) = mlrt_statistics(&spec, &cfg).unwrap();
    let inside = || ev.iter().copied().filter(|&v| v > 1e-8 && v < 1.0 - 1e-8);
    let want_lt = compensated(inside().map(f64::ln));
    let want_l = compensated(inside().map(|v| cfg.c1 * v.ln() + cfg.c2 * (1.0 - v).ln()));
    assert!((lt - want_lt).abs() <= 1e-10 * want_lt.abs());
    assert!((l - want_l).abs() <= 1e-10 * want_l.abs());
}

#[test]
fn pipeline_report_is_consistent() {
    let x1 = gaussian(80, 30, 3);
    let x2 = gaussian(70, 30, 4);
    let opts = TestOptions {
        kurtosis: Some(KurtosisSpec::gaussian()),
        ..TestOptions::default()
    };
    let r = run_test(&x1, &x2, &opts).unwrap();
    assert!((r.k + r.k_prime).abs() < 1e-9);
    assert!((0.0..=1.0).contains(&r.p_value_k));
    assert_eq!(r.decision == Decision::Reject, r.p_value_k < 0.05);
    // sample-mean centering works on n − 1 degrees of freedom
    assert_eq!((r.spectral_params.n1, r.spectral_params.n2), (79, 69));
    assert_eq!(r.spectrum_summary.p, 30);
    assert!(!r.kurtosis_estimated);
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
}

#[test]
fn estimated_kurtosis_is_flagged() {
    let r = run_test(&gaussian(60, 20, 5), &gaussian(60, 20, 6), &TestOptions::default()).unwrap();
    assert!(r.kurtosis_estimated);
    assert!(r.warnings.iter().any(|w| w.starts_with("estimated_kurtosis")));
    assert!(r.kurtosis.delta1.abs() < 1.0 && r.kurtosis.delta2.abs() < 1.0);
}

#[test]
fn pipeline_scale_invariance() {
    let x1 = gaussian(50, 12, 7);
    let x2 = gaussian(45, 12, 8);
    let mut m = gaussian(12, 12, 9).into_inner().scale(0.2);
    for i in 0..12 {
        m[(i, i)] += 2.0;
    }
    let y1 = ObservationMatrix::new(x1.values().matmul(&m).unwrap()).unwrap();
    let y2 = ObservationMatrix::new(x2.values().matmul(&m).unwrap()).unwrap();
    let opts = TestOptions {
        kurtosis: Some(KurtosisSpec::gaussian()),
        ..TestOptions::default()
    };
    let a = run_test(&x1, &x2, &opts).unwrap();
    let b = run_test(&y1, &y2, &opts).unwrap();
    assert!((a.k - b.k).abs() < 1e-7);
    assert!((a.l - b.l).abs() < 1e-7);
    assert!((a.l_tilde - b.l_tilde).abs() < 1e-7);
}

#[test]
fn null_distribution_of_k_is_standard() {
    let sc = Scenario::case(1, 90, 80, 100, 0.0).unwrap();
    let law = sc.null_law().unwrap();
    let r = replicate_statistics(
        &sc,
        2000,
        2024,
        1,
        Purpose::Auxiliary,
        CenteringMode::KnownZeroMean,
        &law,
        &MlrtConfig::likelihood_weights(90, 80),
    );
    assert_eq!(r.failures, 0);
    let ks: Vec<f64> = r.values.iter().map(|v| v.k).collect();
    let n = ks.len() as f64;
    let mean = ks.iter().sum::<f64>() / n;
    let var = ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 0.1, "mean {mean}");
    assert!(var > 0.85 && var < 1.15, "variance {var}");
}

#[test]
fn inflating_the_first_population_raises_k() {
    // Σ₁ = 1.5 Σ₂ with p = 40: a = 0.5 n₁
    let (n1, n2, p) = (60, 60, 40);
    let null = Scenario::case(1, n1, n2, p, 0.0).unwrap();
    let alt = null.with_a(0.5 * n1 as f64);
    let law = null.null_law().unwrap();
    let mlrt = MlrtConfig::likelihood_weights(n1, n2);
    let run = |sc: &Scenario, cell| {
        replicate_statistics(sc, 500, 77, cell, Purpose::Auxiliary, CenteringMode::KnownZeroMean, &law, &mlrt)
            .values
            .iter()
            .map(|v| v.k)
            .collect::<Vec<_>>()
    };
    let mut k0 = run(&null, 1);
    let k1 = run(&alt, 2);
    k0.sort_by(f64::total_cmp);
    let median = 0.5 * (k0[249] + k0[250]);
    let above = k1.iter().filter(|&&k| k > median).count();
    // sign test: P(Bin(500, 1/2) ≥ 306) < 1e-6
    assert!(above >= 306, "{above} of 500 above the null median");
}

#[test]
fn identical_data_produces_a_finite_report() {
    let mut s = StreamKey::new(5, 0, 0, Purpose::Auxiliary, 0).stream();
    let sc = Scenario::case(1, 40, 40, 20, 0.0).unwrap();
    let (x1, _) = draw_dataset(&sc, &mut s).unwrap();
    let r = run_test(&x1, &x1, &TestOptions::default()).unwrap();
    assert!(r.k.is_finite());
    assert!((r.spectrum_summary.min - 0.5).abs() < 1e-9 && (r.spectrum_summary.max - 0.5).abs() < 1e-9);
}
