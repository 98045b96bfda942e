//! Eigenvalues of dense symmetric matrices.
//!
//! The default path reduces the matrix to tridiagonal form with Householder
//! reflections and then runs implicit QL with Wilkinson shifts. A cyclic
//! Jacobi solver is available as an alternative; it is slower but useful as a
//! cross-check since it shares no code with the QL path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Which symmetric eigensolver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    #[default]
    TridiagonalQl,
    Jacobi,
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    symmetric_eigenvalues_with(m, EigenMethod::default())
}

pub fn symmetric_eigenvalues_with(m: &Matrix, method: EigenMethod) -> Result<Vec<f64>> {
    m.ensure_symmetric()?;
    let mut vals = match method {
        EigenMethod::TridiagonalQl => {
            let (mut d, mut e) = tridiagonalize(m.clone());
            implicit_ql(&mut d, &mut e, 30 * m.rows().max(1))?;
            d
        }
        EigenMethod::Jacobi => jacobi(m.clone(), 100)?,
    };
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Householder reduction to tridiagonal form.
///
/// Returns the diagonal `d` and the sub-diagonal `e`, where `e[i]` couples
/// rows i and i+1 and `e[n-1] = 0`.
pub fn tridiagonalize(mut a: Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let norm: f64 = ((k + 1)..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        d[k] = a[(k, k)];
        if norm == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let x0 = a[(k + 1, k)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        e[k] = alpha;
        // v = x - alpha e1, normalized
        for i in (k + 1)..n {
            v[i] = a[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm = ((k + 1)..n).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for vi in &mut v[(k + 1)..n] {
            *vi /= vnorm;
        }
        // p = A v over the trailing block
        for i in (k + 1)..n {
            let row = &a.row(i)[(k + 1)..n];
            w[i] = row.iter().zip(&v[(k + 1)..n]).map(|(x, y)| x * y).sum();
        }
        let kappa: f64 = ((k + 1)..n).map(|i| v[i] * w[i]).sum();
        for i in (k + 1)..n {
            w[i] -= kappa * v[i];
        }
        // A <- A - 2 v wᵀ - 2 w vᵀ
        for i in (k + 1)..n {
            let (vi, wi) = (v[i], w[i]);
            let row = &mut a.row_mut(i)[(k + 1)..n];
            for (j, x) in row.iter_mut().enumerate() {
                let jj = j + k + 1;
                *x -= 2.0 * (vi * w[jj] + wi * v[jj]);
            }
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2, n - 2)];
        e[n - 2] = a[(n - 1, n - 2)];
    }
    if n >= 1 {
        d[n - 1] = a[(n - 1, n - 1)];
    }
    (d, e)
}

/// Implicit QL iteration with Wilkinson shifts on a symmetric tridiagonal
/// matrix. `d` is overwritten with the (unsorted) eigenvalues.
pub fn implicit_ql(d: &mut [f64], e: &mut [f64], max_iterations: usize) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let mut total = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            total += 1;
            if total > max_iterations {
                return Err(Error::NonConvergence { iterations: total });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
fn jacobi(mut a: Matrix, max_sweeps: usize) -> Result<Vec<f64>> {
    let n = a.rows();
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _ in 0..max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            return Ok((0..n).map(|i| a[(i, i)]).collect());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: max_sweeps,
    })
}
