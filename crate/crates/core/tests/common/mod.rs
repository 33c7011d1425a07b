//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's numerics.

#![allow(dead_code, clippy::needless_range_loop)]

use stochconc::DenseMatrix;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn rows_of(a: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..a.rows())
        .map(|i| (0..a.cols()).map(|j| a.get(i, j)).collect())
        .collect()
}

/// `AᵀA` by explicit triple loop.
pub fn gram(a: &DenseMatrix) -> Vec<Vec<f64>> {
    let rows = rows_of(a);
    let n = a.cols();
    let mut g = vec![vec![0.0; n]; n];
    for r in &rows {
        for i in 0..n {
            for j in 0..n {
                g[i][j] += r[i] * r[j];
            }
        }
    }
    g
}

pub fn frobenius_sq(a: &DenseMatrix) -> f64 {
    rows_of(a).iter().flatten().map(|v| v * v).sum()
}

/// `(1 - λ_min(AᵀA)/‖A‖_F², 1 - λ_max(AᵀA)/‖A‖_F²)`, with `λ_min = 0` for
/// wide matrices.
pub fn rk_rates(a: &DenseMatrix) -> (f64, f64) {
    let ev = jacobi_eigenvalues(gram(a));
    let f = frobenius_sq(a);
    let lo = if a.rows() < a.cols() { 0.0 } else { ev[0] };
    (1.0 - lo / f, 1.0 - ev[ev.len() - 1] / f)
}

/// `(σ_min, σ_max)` over the `min(m, n)` singular values.
pub fn singular_extremes(a: &DenseMatrix) -> (f64, f64) {
    let ev = jacobi_eigenvalues(gram(a));
    let k = a.rows().min(a.cols());
    let top = &ev[ev.len() - k..];
    (top[0].max(0.0).sqrt(), top[k - 1].sqrt())
}

/// Explicit `E[Y ⊗ Y]` for the RK projectors `Y_i = I - a_i a_iᵀ/‖a_i‖²`
/// with probabilities `‖a_i‖²/‖A‖_F²`.
pub fn expected_kron2(a: &DenseMatrix) -> Vec<Vec<f64>> {
    let rows = rows_of(a);
    let n = a.cols();
    let f = frobenius_sq(a);
    let mut out = vec![vec![0.0; n * n]; n * n];
    for r in &rows {
        let ns: f64 = r.iter().map(|v| v * v).sum();
        let y: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| f64::from(u8::from(i == j)) - r[i] * r[j] / ns).collect())
            .collect();
        let w = ns / f;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out[i * n + k][j * n + l] += w * y[i][j] * y[k][l];
                    }
                }
            }
        }
    }
    out
}

/// `E‖e_t‖²` and `E‖e_t‖⁴` for `t = 0..=k` under RK with norm-squared
/// sampling, by recursion over every index sequence.
pub fn rk_exact_moments(a: &DenseMatrix, x_star: &[f64], x0: &[f64], k: usize) -> Vec<(f64, f64)> {
    let rows = rows_of(a);
    let f = frobenius_sq(a);
    let mut acc = vec![(0.0, 0.0); k + 1];
    fn walk(
        rows: &[Vec<f64>],
        f: f64,
        e: Vec<f64>,
        prob: f64,
        t: usize,
        k: usize,
        acc: &mut [(f64, f64)],
    ) {
        let s: f64 = e.iter().map(|v| v * v).sum();
        acc[t].0 += prob * s;
        acc[t].1 += prob * s * s;
        if t == k {
            return;
        }
        for r in rows {
            let ns: f64 = r.iter().map(|v| v * v).sum();
            let c: f64 = r.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() / ns;
            let next: Vec<f64> = e.iter().zip(r).map(|(ei, ri)| ei - c * ri).collect();
            walk(rows, f, next, prob * ns / f, t + 1, k, acc);
        }
    }
    let e0: Vec<f64> = x0.iter().zip(x_star).map(|(a, b)| a - b).collect();
    walk(&rows, f, e0, 1.0, 0, k, &mut acc);
    acc
}

/// Sample mean and unbiased sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
