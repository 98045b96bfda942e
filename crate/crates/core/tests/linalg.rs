use covtest::cholesky::cholesky_factor;
use covtest::eigen::{symmetric_eigenvalues, symmetric_eigenvalues_with, EigenMethod};
use covtest::rng::{Purpose, StreamKey};
use covtest::{beta_spectrum, scatter, CenteringMode, Matrix, ObservationMatrix, DEFAULT_CLAMP_EPS};

fn random_symmetric(n: usize, seed: u64) -> Matrix {
    let mut s = StreamKey::new(seed, 0, 0, Purpose::Auxiliary, 0).stream();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = 2.0 * s.open_unit() - 1.0;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn gaussian_rows(n: usize, p: usize, seed: u64) -> ObservationMatrix {
    let mut s = StreamKey::new(seed, 0, 1, Purpose::Auxiliary, 0).stream();
    let data: Vec<f64> = (0..n * p).map(|_| s.normal()).collect();
    ObservationMatrix::new(Matrix::from_vec(n, p, data).unwrap()).unwrap()
}

/// det(M) by Gaussian elimination with partial pivoting.
fn det(mut m: Matrix) -> f64 {
    let n = m.rows();
    let mut d = 1.0;
    for k in 0..n {
        let piv = (k..n).max_by(|&a, &b| m[(a, k)].abs().total_cmp(&m[(b, k)].abs())).unwrap();
        if m[(piv, k)] == 0.0 {
            return 0.0;
        }
        if piv != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            d = -d;
        }
        d *= m[(k, k)];
        for i in (k + 1)..n {
            let f = m[(i, k)] / m[(k, k)];
            for j in k..n {
                m[(i, j)] -= f * m[(k, j)];
            }
        }
    }
    d
}

fn char_poly(m: &Matrix, x: f64) -> f64 {
    det(m.sub(&Matrix::identity(m.rows()).scale(x)).unwrap())
}

/// Roots of det(M − xI) by sign-change scanning followed by bisection.
fn characteristic_roots(m: &Matrix) -> Vec<f64> {
    let bound = (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1e-3;
    let steps = 200_000;
    let h = 2.0 * bound / steps as f64;
    let mut roots = Vec::new();
    let mut x0 = -bound;
    let mut f0 = char_poly(m, x0);
    for i in 1..=steps {
        let x1 = -bound + i as f64 * h;
        let f1 = char_poly(m, x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..200 {
                let c = 0.5 * (a + b);
                let fc = char_poly(m, c);
                if fc.signum() == fa.signum() {
                    a = c;
                    fa = fc;
                } else {
                    b = c;
                }
            }
            roots.push(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

#[test]
fn eigenvalues_match_characteristic_polynomial_roots() {
    for seed in [1, 2, 3] {
        let m = random_symmetric(8, seed);
        let oracle = characteristic_roots(&m);
        assert_eq!(oracle.len(), 8, "seed {seed}: {oracle:?}");
        for method in [EigenMethod::TridiagonalQl, EigenMethod::Jacobi] {
            let ev = symmetric_eigenvalues_with(&m, method).unwrap();
            for (a, b) in ev.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8, "{method:?} seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn larger_matrices_agree_across_solvers_and_keep_the_trace() {
    let m = random_symmetric(60, 9);
    let ql = symmetric_eigenvalues(&m).unwrap();
    let jac = symmetric_eigenvalues_with(&m, EigenMethod::Jacobi).unwrap();
    let radius = ql.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    for (a, b) in ql.iter().zip(&jac) {
        assert!((a - b).abs() <= 1e-10 * radius);
    }
    let sum: f64 = ql.iter().sum();
    assert!((sum - m.trace()).abs() <= 1e-9 * m.trace().abs().max(1.0));
}

#[test]
fn cholesky_reconstructs_scatter_sums() {
    let a = scatter(&gaussian_rows(40, 25, 4), CenteringMode::SampleMean).unwrap();
    let b = scatter(&gaussian_rows(30, 25, 5), CenteringMode::SampleMean).unwrap();
    let pooled = a.values().add(b.values()).unwrap();
    let l = cholesky_factor(&pooled).unwrap();
    let back = l.reconstruct();
    let err = back.sub(&pooled).unwrap().frobenius_norm() / pooled.frobenius_norm();
    assert!(err < 1e-10);
    // factoring the reconstruction returns the same factor
    let again = cholesky_factor(&back).unwrap();
    let diff = again.values().sub(l.values()).unwrap().frobenius_norm() / l.values().frobenius_norm();
    assert!(diff < 1e-10);
}

fn gauss_jordan_inverse(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    for k in 0..n {
        let piv = (k..n).max_by(|&x, &y| a[(x, k)].abs().total_cmp(&a[(y, k)].abs())).unwrap();
        for j in 0..n {
            let t = a[(k, j)];
            a[(k, j)] = a[(piv, j)];
            a[(piv, j)] = t;
            let t = inv[(k, j)];
            inv[(k, j)] = inv[(piv, j)];
            inv[(piv, j)] = t;
        }
        let d = a[(k, k)];
        for j in 0..n {
            a[(k, j)] /= d;
            inv[(k, j)] /= d;
        }
        for i in 0..n {
            if i != k {
                let f = a[(i, k)];
                for j in 0..n {
                    a[(i, j)] -= f * a[(k, j)];
                    inv[(i, j)] -= f * inv[(k, j)];
                }
            }
        }
    }
    inv
}

#[test]
fn rank_deficient_second_sample_gives_one_unit_eigenvalue() {
    // n₁ = 5, n₂ = 3, p = 4: A₂ has rank 3, so exactly one eigenvalue sits at 1
    let a1 = scatter(&gaussian_rows(5, 4, 21), CenteringMode::KnownZeroMean).unwrap();
    let a2 = scatter(&gaussian_rows(3, 4, 22), CenteringMode::KnownZeroMean).unwrap();
    let spec = beta_spectrum(&a1, &a2, DEFAULT_CLAMP_EPS).unwrap();
    assert_eq!(spec.count_one(), 1);
    assert_eq!(spec.count_zero(), 0);
    assert!(spec.warnings().is_empty());

    // B = A₁(A₁+A₂)⁻¹ by dense inversion; power traces pin down the spectrum
    let pooled = a1.values().add(a2.values()).unwrap();
    let b = a1.values().matmul(&gauss_jordan_inverse(&pooled)).unwrap();
    let mut power = b.clone();
    for k in 1..=4 {
        let want: f64 = spec.eigenvalues().iter().map(|v| v.powi(k)).sum();
        assert!((power.trace() - want).abs() < 1e-10, "k = {k}");
        power = power.matmul(&b).unwrap();
    }
    assert!(det(b.sub(&Matrix::identity(4)).unwrap()).abs() < 1e-10);
}

#[test]
fn spectrum_sum_equals_congruence_trace() {
    let a1 = scatter(&gaussian_rows(30, 20, 31), CenteringMode::KnownZeroMean).unwrap();
    let a2 = scatter(&gaussian_rows(25, 20, 32), CenteringMode::KnownZeroMean).unwrap();
    let spec = beta_spectrum(&a1, &a2, DEFAULT_CLAMP_EPS).unwrap();
    let l = cholesky_factor(&a1.values().add(a2.values()).unwrap()).unwrap();
    let c = l.congruence_inverse(a1.values()).unwrap();
    let sum: f64 = spec.eigenvalues().iter().sum();
    assert!((sum - c.trace()).abs() <= 1e-9 * c.trace());
}

#[test]
fn pooled_rank_collapse_is_reported() {
    // p > n₁ + n₂ makes the pooled scatter singular
    let a1 = scatter(&gaussian_rows(3, 7, 41), CenteringMode::KnownZeroMean).unwrap();
    let a2 = scatter(&gaussian_rows(3, 7, 42), CenteringMode::KnownZeroMean).unwrap();
    match beta_spectrum(&a1, &a2, DEFAULT_CLAMP_EPS) {
        Err(covtest::Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 7),
        other => panic!("expected NotPositiveDefinite, got {other:?}"),
    }
}
