use covtest::rng::{Purpose, StreamKey};
use covtest::sim::{
    draw_dataset, run_cell, run_table, size_grid, Calibration, Distribution, Scenario, SimConfig, StatisticKind,
    TableConfig,
};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn uniform_deviates_have_unit_variance_and_light_tails() {
    let mut s = StreamKey::new(3, 0, 0, Purpose::Auxiliary, 0).stream();
    let n = 1_000_000;
    let xs: Vec<f64> = (0..n).map(|_| s.uniform_unit_variance()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
    assert!(m2 > 0.997 && m2 < 1.003, "{m2}");
    let excess = m4 / (m2 * m2) - 3.0;
    assert!(excess > -1.21 && excess < -1.19, "{excess}");
    assert_eq!(Distribution::Uniform.excess_kurtosis(), -1.2);
}

#[test]
fn datasets_are_reproducible() {
    let sc = Scenario::case(4, 20, 15, 10, 3.0).unwrap();
    let key = StreamKey::new(8, 4, 1, Purpose::Alternative, 5);
    let a = draw_dataset(&sc, &mut key.stream()).unwrap();
    let b = draw_dataset(&sc, &mut key.stream()).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.0.n_obs(), a.1.n_obs(), a.0.dim()), (20, 15, 10));
}

#[test]
fn inflation_scales_only_the_first_sample() {
    let base = Scenario::case(1, 10, 10, 4, 0.0).unwrap();
    let alt = base.with_a(30.0);
    let key = StreamKey::new(1, 1, 1, Purpose::Auxiliary, 0);
    let (x0, y0) = draw_dataset(&base, &mut key.stream()).unwrap();
    let (x1, y1) = draw_dataset(&alt, &mut key.stream()).unwrap();
    assert_eq!(y0, y1);
    let ratio = x1.values()[(0, 0)] / x0.values()[(0, 0)];
    assert!((ratio - 2.0).abs() < 1e-12);
}

#[test]
fn single_replicate_rates_are_binary() {
    let cfg = SimConfig::new(Scenario::case(2, 30, 30, 20, 5.0).unwrap(), 1, 9);
    let cell = run_cell(&cfg).unwrap();
    for r in &cell.rates {
        for v in [r.rate, r.size_corrected_rate].into_iter().flatten() {
            assert!(v == 0.0 || v == 1.0);
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = SimConfig::new(Scenario::case(3, 40, 30, 25, 7.0).unwrap(), 60, 123);
    let a = pool(1).install(|| run_cell(&cfg).unwrap());
    let b = pool(3).install(|| run_cell(&cfg).unwrap());
    assert_eq!(a.rates, b.rates);
}

#[test]
fn size_corrected_rate_at_zero_is_the_level() {
    let cfg = TableConfig::new(1, vec![(40, 30, 25)], vec![0.0, 3.0], 400, 5);
    let t = run_table(&cfg).unwrap();
    let cell = t.cell(40, 30, 25, 0.0).unwrap();
    for r in &cell.rates {
        let sc = r.size_corrected_rate.unwrap();
        assert!((sc - 0.05).abs() <= 2.0 / 400.0, "{:?}", r);
    }
}

#[test]
fn asymptotic_calibration_skips_size_correction() {
    let mut cfg = SimConfig::new(Scenario::case(1, 30, 30, 20, 0.0).unwrap(), 20, 1);
    cfg.calibration = Calibration::Asymptotic;
    cfg.statistics = vec![StatisticKind::K];
    let cell = run_cell(&cfg).unwrap();
    assert_eq!(cell.rates.len(), 1);
    assert!(cell.rates[0].rate.is_some() && cell.rates[0].size_corrected_rate.is_none());
}

#[test]
fn sixteen_cell_grid() {
    let cfg = TableConfig::new(1, size_grid(1), vec![0.0, 3.0, 7.0, 10.0], 4, 42);
    let t = run_table(&cfg).unwrap();
    assert_eq!(t.cells.len(), 16);
    assert!(t.failures.is_empty());
    assert_eq!(t.rows().len(), 48);
}

#[test]
fn table_one_regime_one_cell() {
    let cfg = TableConfig::new(1, vec![(90, 80, 100)], vec![0.0, 3.0, 10.0], 1000, 42);
    let t = run_table(&cfg).unwrap();
    let rate = |a: f64| t.cell(90, 80, 100, a).unwrap().rate(StatisticKind::K).unwrap().rate.unwrap();
    assert!((rate(0.0) - 0.054).abs() <= 0.02, "size {}", rate(0.0));
    assert!((rate(10.0) - 0.869).abs() <= 0.04, "power {}", rate(10.0));
    assert!(rate(10.0) >= rate(3.0));
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(run_table(&TableConfig::new(1, vec![], vec![0.0], 10, 1)).is_err());
    assert!(run_table(&TableConfig::new(9, vec![(45, 40, 50)], vec![0.0], 10, 1)).is_err());
    let t = run_table(&TableConfig::new(1, vec![(10, 10, 30)], vec![0.0], 10, 1)).unwrap();
    assert_eq!(t.failures.len(), 1);
    assert!(SimConfig::new(Scenario::case(1, 30, 30, 20, 0.0).unwrap(), 0, 1).validate().is_err());
}
