//! Extreme eigenvalues of symmetric positive semidefinite operators given
//! only through their action `v -> M v`.
//!
//! Two matrix-free routines live here:
//!
//! * [`extreme_eigenvalue_sym`]: power iteration, with `λ_min` obtained from
//!   the shifted operator `λ̄ I - M`. Simple and robust when the spectral gap
//!   at the requested end is not tiny.
//! * [`lanczos_extremes`]: three-term Lanczos with only local
//!   reorthogonalization, tracking both extreme Ritz values of the tridiagonal
//!   projection. Loss of global orthogonality only produces duplicate Ritz
//!   values; the extremes still
//!   converge, and they do so at a rate governed by the square root of the
//!   relative gap. The lifted operators of nearly square systems have relative
//!   gaps around 1e-5, far out of reach of power iteration.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, norm, DenseMatrix};
use crate::rng::SeededStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Relative tolerance on the eigenvalue estimate.
    pub tol: f64,
    pub max_iters: usize,
    /// Seed of the pseudo-random start vector.
    pub seed: u64,
    /// Upper bound `λ̄ >= λ_max` used to turn `λ_min` into a dominant
    /// eigenvalue of `λ̄ I - M`. All projector families here are contractions,
    /// so 1 is valid for them.
    pub shift: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            tol: 1e-10,
            max_iters: 10_000,
            seed: 0,
            shift: 1.0,
        }
    }
}

fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut s = SeededStream::new(seed);
    let mut v: Vec<f64> = (0..n).map(|_| s.uniform() - 0.5).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Largest or smallest eigenvalue of a symmetric PSD action by power iteration.
///
/// Converged when successive Rayleigh quotients agree to `tol` (relative) and
/// the eigen-residual `‖Bv - λv‖` is below `sqrt(tol)` relative, where `B` is
/// `M` or the shifted operator. On failure the error carries the last
/// estimate (already un-shifted) and residual.
pub fn extreme_eigenvalue_sym<F>(apply: F, n: usize, which: Extreme, opts: &SpectralOptions) -> Result<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    if n == 0 {
        return Err(Error::invalid("extreme_eigenvalue_sym: empty operator"));
    }
    let shift = opts.shift;
    let unshift = |lam: f64| match which {
        Extreme::Max => lam,
        Extreme::Min => shift - lam,
    };
    let mut v = start_vector(n, opts.seed);
    let mut w = vec![0.0; n];
    let mut lam_prev = f64::NAN;
    let mut residual = f64::INFINITY;
    let mut lam = 0.0;
    for _ in 0..opts.max_iters {
        apply(&v, &mut w);
        if which == Extreme::Min {
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi = shift * vi - *wi;
            }
        }
        lam = dot(&v, &w);
        let wn = norm(&w);
        if wn == 0.0 {
            return Ok(unshift(0.0));
        }
        residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - lam * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = lam.abs().max(f64::MIN_POSITIVE);
        if (lam - lam_prev).abs() <= opts.tol * scale && residual <= opts.tol.sqrt() * scale {
            return Ok(unshift(lam));
        }
        lam_prev = lam;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        estimate: unshift(lam),
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosExtremes {
    pub min: f64,
    pub max: f64,
    pub iterations: usize,
}

/// Both extreme eigenvalues of a symmetric action by Lanczos.
///
/// Ritz extremes are re-evaluated every few steps; the run stops once both
/// moved by less than `tol * |θ| + 4 ε ‖T‖` over two consecutive checks, when
/// the Krylov space becomes invariant, or after `n` steps for tiny operators.
pub fn lanczos_extremes<F>(apply: F, n: usize, opts: &SpectralOptions) -> Result<LanczosExtremes>
where
    F: Fn(&[f64], &mut [f64]),
{
    const CHECK_EVERY: usize = 8;
    if n == 0 {
        return Err(Error::invalid("lanczos_extremes: empty operator"));
    }
    let mut q = start_vector(n, opts.seed);
    let mut q_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new(); // betas[j] couples q_j and q_{j+1}
    let mut last: Option<(f64, f64)> = None;
    let mut stable_checks = 0;

    for j in 0..opts.max_iters {
        apply(&q, &mut w);
        let beta_prev = if j == 0 { 0.0 } else { betas[j - 1] };
        let mut alpha = dot(&q, &w);
        axpy(-alpha, &q, &mut w);
        axpy(-beta_prev, &q_prev, &mut w);
        // one step of local reorthogonalization against q_j
        let c = dot(&q, &w);
        axpy(-c, &q, &mut w);
        alpha += c;
        alphas.push(alpha);
        let beta = norm(&w);

        let scale_t = alphas
            .iter()
            .map(|a| a.abs())
            .chain(betas.iter().copied())
            .fold(beta, f64::max)
            .max(f64::MIN_POSITIVE);
        let invariant = beta <= 1e-13 * scale_t;
        let exhausted = alphas.len() >= n;
        let check = (j + 1) % CHECK_EVERY == 0 || invariant || exhausted;

        if check {
            let (lo, hi) = tridiagonal_extremes(&alphas, &betas);
            if invariant || exhausted {
                return Ok(LanczosExtremes {
                    min: lo,
                    max: hi,
                    iterations: j + 1,
                });
            }
            if let Some((plo, phi)) = last {
                let tnorm = lo.abs().max(hi.abs());
                let slack = 4.0 * f64::EPSILON * tnorm;
                let ok_lo = (lo - plo).abs() <= opts.tol * lo.abs() + slack;
                let ok_hi = (hi - phi).abs() <= opts.tol * hi.abs() + slack;
                if ok_lo && ok_hi {
                    stable_checks += 1;
                    if stable_checks >= 2 {
                        return Ok(LanczosExtremes {
                            min: lo,
                            max: hi,
                            iterations: j + 1,
                        });
                    }
                } else {
                    stable_checks = 0;
                }
            }
            last = Some((lo, hi));
        }

        betas.push(beta);
        std::mem::swap(&mut q_prev, &mut q);
        for (qi, wi) in q.iter_mut().zip(&w) {
            *qi = wi / beta;
        }
    }
    let (lo, hi) = tridiagonal_extremes(&alphas, &betas[..alphas.len() - 1]);
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        estimate: hi,
        residual: last.map(|(plo, _)| (plo - lo).abs()).unwrap_or(f64::NAN),
    })
}

/// Number of eigenvalues of the symmetric tridiagonal `(diag, off)` that are
/// strictly below `x` (Sturm sequence).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (i, &a) in diag.iter().enumerate() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        d = a - x - if i == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (a.abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest and largest eigenvalue of a symmetric tridiagonal by bisection.
pub(crate) fn tridiagonal_extremes(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let k = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < k { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let bisect = |target: usize| {
        // smallest x with count(< x) >= target
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count(diag, off, mid) >= target {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (bisect(1), bisect(k))
}

/// All eigenvalues of a dense symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    let (r, c) = m.shape();
    if r != c {
        return Err(Error::Dimension(format!("symmetric_eigenvalues: {r}x{c} is not square")));
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.to_nalgebra()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

/// Matrix-vector action of a dense matrix, for use with the routines above.
pub fn dense_action(m: &DenseMatrix) -> impl Fn(&[f64], &mut [f64]) + '_ {
    move |v, out| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(m.row(i), v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag_action(d: Vec<f64>) -> impl Fn(&[f64], &mut [f64]) {
        move |v, out| {
            for i in 0..d.len() {
                out[i] = d[i] * v[i];
            }
        }
    }

    #[test]
    fn power_diagonal_max() {
        let opts = SpectralOptions::default();
        let lam = extreme_eigenvalue_sym(diag_action(vec![0.5, 0.0, 0.0, 0.5]), 4, Extreme::Max, &opts).unwrap();
        assert_relative_eq!(lam, 0.5, max_relative = 1e-10);
    }

    #[test]
    fn power_two_by_two_min() {
        // E[Y] for the two-row family with equal weights
        let m = DenseMatrix::from_rows(&[[0.25, -0.25], [-0.25, 0.75]]).unwrap();
        let opts = SpectralOptions::default();
        let lam = extreme_eigenvalue_sym(dense_action(&m), 2, Extreme::Min, &opts).unwrap();
        assert_relative_eq!(lam, (1.0 - 0.5f64.sqrt()) / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn power_identity() {
        let opts = SpectralOptions::default();
        for n in [1, 3, 10] {
            let id = |v: &[f64], out: &mut [f64]| out.copy_from_slice(v);
            assert_relative_eq!(extreme_eigenvalue_sym(id, n, Extreme::Max, &opts).unwrap(), 1.0, max_relative = 1e-12);
            assert_relative_eq!(extreme_eigenvalue_sym(id, n, Extreme::Min, &opts).unwrap(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn power_reports_non_convergence() {
        let opts = SpectralOptions {
            max_iters: 3,
            ..Default::default()
        };
        let d: Vec<f64> = (0..50).map(|i| 1.0 - i as f64 * 1e-4).collect();
        let err = extreme_eigenvalue_sym(diag_action(d), 50, Extreme::Max, &opts).unwrap_err();
        match err {
            Error::NoConvergence { estimate, .. } => assert!(estimate > 0.99 && estimate <= 1.0),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn lanczos_clustered_spectrum() {
        // relative gap 1e-6 at the top: hopeless for power iteration
        let n = 400;
        let d: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { 0.999999 - i as f64 * 1e-3 / n as f64 }).collect();
        let r = lanczos_extremes(diag_action(d.clone()), n, &SpectralOptions::default()).unwrap();
        assert_relative_eq!(r.max, 1.0, max_relative = 1e-12);
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(r.min, min, max_relative = 1e-10);
    }

    #[test]
    fn lanczos_tiny_operator_terminates() {
        let r = lanczos_extremes(diag_action(vec![0.5, 0.0, 0.0, 0.5]), 4, &SpectralOptions::default()).unwrap();
        assert!(r.min.abs() < 1e-14);
        assert_relative_eq!(r.max, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn tridiagonal_bisection_matches_dense() {
        let diag = [2.0, -1.0, 0.5, 3.0];
        let off = [0.3, 1.2, -0.7];
        let mut m = vec![0.0; 16];
        for i in 0..4 {
            m[i * 4 + i] = diag[i];
            if i < 3 {
                m[i * 4 + i + 1] = off[i];
                m[(i + 1) * 4 + i] = off[i];
            }
        }
        let ev = symmetric_eigenvalues(&DenseMatrix::new(4, 4, m).unwrap()).unwrap();
        let (lo, hi) = tridiagonal_extremes(&diag, &off);
        assert_relative_eq!(lo, ev[0], epsilon = 1e-13);
        assert_relative_eq!(hi, ev[3], epsilon = 1e-13);
    }
}
