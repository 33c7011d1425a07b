//! Convergence rates, lifted moment parameters and the variance,
//! concentration and trajectory bounds built from them.
//!
//! Conventions: `‖e_0‖²` is passed explicitly as `e0_norm_sq`; every bound
//! returns its raw value, and callers that present probabilities decide
//! whether to clamp. Values that exceed 1 where a probability is expected
//! carry `vacuous = true` in [`BoundValue`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eigen::{lanczos_extremes, symmetric_eigenvalues, SpectralOptions};
use crate::error::{Error, Result};
use crate::kron::{LiftedOperator, ProjectorFamily, EXPLICIT_LIMIT};
use crate::matrix::{axis_norms, spectral_summary, Axis, DenseMatrix};
use crate::solvers::{Method, Sampling};

/// Relative threshold below which `σ_min / σ_max` counts as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Expectation rate `r`, `η = λ_min(E[Y])`, and the trajectory parameters
/// `ρ`, `α` for one (matrix, method, sampling) combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub r: f64,
    pub eta: f64,
    pub rho: f64,
    pub alpha: f64,
    /// `1 - r`, kept separately because `r` is often within 1e-9 of 1.
    pub r_deficit: f64,
    /// `1 - η`.
    pub eta_deficit: f64,
    /// False when `r = 1` (the error can stall in some direction).
    pub contractive: bool,
}

impl Rates {
    fn from_deficits(r_deficit: f64, eta_deficit: f64, sigma_ratio_ok: bool) -> Rates {
        let r_deficit = if sigma_ratio_ok { r_deficit } else { 0.0 };
        let r = 1.0 - r_deficit;
        Rates {
            r,
            eta: 1.0 - eta_deficit,
            rho: r,
            alpha: 1.0,
            r_deficit,
            eta_deficit,
            contractive: sigma_ratio_ok,
        }
    }
}

/// RK with norm-squared sampling: `r = ρ = 1 - σ²_min/‖A‖²_F`,
/// `η = 1 - σ²_max/‖A‖²_F`. Wide matrices get `r = 1`.
pub fn rk_rates(a: &DenseMatrix) -> Result<Rates> {
    let s = spectral_summary(a, RANK_TOL)?;
    Ok(Rates::from_deficits(
        s.sigma_min * s.sigma_min / s.fro_norm_sq,
        s.sigma_max * s.sigma_max / s.fro_norm_sq,
        s.full_column_rank,
    ))
}

/// RGS with norm-squared sampling. The residual lives in the range of `A`,
/// so the rate uses the smallest of the `min(m, n)` singular values.
pub fn rgs_rates(a: &DenseMatrix) -> Result<Rates> {
    let s = spectral_summary(a, RANK_TOL)?;
    let smin = s.sigma_min_nonzero_dims();
    Ok(Rates::from_deficits(
        smin * smin / s.fro_norm_sq,
        s.sigma_max * s.sigma_max / s.fro_norm_sq,
        smin > RANK_TOL * s.sigma_max,
    ))
}

/// Rates of an arbitrary projector family from a dense eigensolve of
/// `E[uuᵀ] = I - E[Y]`.
pub fn family_rates(family: &ProjectorFamily) -> Result<Rates> {
    let m = expected_outer(family)?;
    let ev = symmetric_eigenvalues(&m)?;
    let lo = ev[0].max(0.0);
    let hi = *ev.last().expect("nonempty");
    Ok(Rates::from_deficits(lo, hi, lo > RANK_TOL * hi))
}

fn expected_outer(family: &ProjectorFamily) -> Result<DenseMatrix> {
    let n = family.dim();
    let mut data = vec![0.0; n * n];
    for (i, &w) in family.weights().iter().enumerate() {
        let u = family.direction(i);
        for p in 0..n {
            let wp = w * u[p];
            for q in 0..n {
                data[p * n + q] += wp * u[q];
            }
        }
    }
    DenseMatrix::new(n, n, data)
}

/// Rates for any supported method and sampling.
pub fn rates_for(a: &DenseMatrix, method: Method, sampling: Sampling) -> Result<Rates> {
    match (method, sampling) {
        (Method::Rk | Method::RkIneq, Sampling::NormSquared) => rk_rates(a),
        (Method::Rgs, Sampling::NormSquared) => rgs_rates(a),
        _ => family_rates(&family_for(a, method, sampling)?),
    }
}

/// The projector family whose lifted moments govern `method` on `a`.
///
/// For RGS on a tall matrix the residual stays in `range(A)`; the columns are
/// expressed in an orthonormal basis of that range (the `R` factor of a thin
/// QR), so the family acts on `R^n` instead of `R^m`.
pub fn family_for(a: &DenseMatrix, method: Method, sampling: Sampling) -> Result<ProjectorFamily> {
    match method {
        Method::Rk | Method::RkIneq => ProjectorFamily::rk(a, sampling),
        Method::Rgs if a.rows() <= a.cols() => ProjectorFamily::rgs(a, sampling),
        Method::Rgs => {
            let norms = axis_norms(a, Axis::Col);
            if let Some(index) = norms.iter().position(|&v| v == 0.0) {
                return Err(Error::ZeroLine { axis: "column", index });
            }
            let r = a.to_nalgebra().qr().r();
            let n = a.cols();
            let directions = (0..n)
                .map(|j| {
                    let col: Vec<f64> = (0..n).map(|i| r[(i, j)]).collect();
                    let nc = crate::matrix::norm(&col);
                    col.into_iter().map(|v| v / nc).collect()
                })
                .collect();
            ProjectorFamily::new(sampling.weights(&norms), directions)
        }
    }
}

/// `μ_p = λ_max(E[Y^{⊗p}])` and `η_p = λ_min(E[Y^{⊗p}])`, with the deficits
/// `1 - μ_p`, `1 - η_p` computed directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftedExtremes {
    pub p: usize,
    pub mu: f64,
    pub eta: f64,
    pub mu_deficit: f64,
    pub eta_deficit: f64,
    pub iterations: usize,
}

/// Extreme eigenvalues of the lifted operator.
///
/// `p = 1` uses a dense eigensolve of `E[uuᵀ]`. Higher orders run Lanczos on
/// the matrix-free deficit operator `I - E[Y^{⊗p}]`; `p >= 3` is limited to
/// `n^p <= 4096`.
pub fn lifted_extremes(family: &ProjectorFamily, p: usize, opts: &SpectralOptions) -> Result<LiftedExtremes> {
    if p == 0 {
        return Err(Error::invalid("moment order p must be >= 1"));
    }
    if p == 1 {
        let ev = symmetric_eigenvalues(&expected_outer(family)?)?;
        let lo = ev[0].max(0.0);
        let hi = ev.last().copied().expect("nonempty").min(1.0);
        return Ok(LiftedExtremes {
            p,
            mu: 1.0 - lo,
            eta: 1.0 - hi,
            mu_deficit: lo,
            eta_deficit: hi,
            iterations: 0,
        });
    }
    if p >= 3 {
        let size = (family.dim() as u128).pow(p as u32);
        if size > EXPLICIT_LIMIT as u128 {
            return Err(Error::SizeGuard {
                what: "lifted operator dimension n^p for p >= 3",
                required: size,
                limit: EXPLICIT_LIMIT as u128,
            });
        }
    }
    let op = LiftedOperator::new(family, p)?;
    let ext = lanczos_extremes(|x, out| op.apply_deficit(x, out), op.dim(), opts)?;
    let lo = ext.min.clamp(0.0, 1.0);
    let hi = ext.max.clamp(0.0, 1.0);
    Ok(LiftedExtremes {
        p,
        mu: 1.0 - lo,
        eta: 1.0 - hi,
        mu_deficit: lo,
        eta_deficit: hi,
        iterations: ext.iterations,
    })
}

/// `μ_p = ‖E[(YᵀY)^{⊗p}]‖`.
pub fn compute_mu_p(family: &ProjectorFamily, p: usize, opts: &SpectralOptions) -> Result<f64> {
    Ok(lifted_extremes(family, p, opts)?.mu)
}

/// `ln μ / ln r` from the deficits `1 - μ` and `1 - r`.
pub fn log_r_mu(mu_deficit: f64, r_deficit: f64) -> f64 {
    (-mu_deficit).ln_1p() / (-r_deficit).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceForm {
    /// `(μ^k - η^{2k}) ‖e_0‖⁴`
    #[default]
    Safe,
    /// `(μ^k - η^k) ‖e_0‖⁴`
    Paper,
}

impl VarianceForm {
    pub fn name(self) -> &'static str {
        match self {
            VarianceForm::Safe => "safe",
            VarianceForm::Paper => "paper",
        }
    }
}

/// Scalar inputs of every bound for one system and method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundParams {
    pub r: f64,
    /// `μ = μ₂`.
    pub mu: f64,
    /// `η = η₁`.
    pub eta: f64,
    pub mu_p: BTreeMap<usize, f64>,
    pub eta_p: BTreeMap<usize, f64>,
    pub rho: f64,
    pub alpha: f64,
    pub e0_norm_sq: f64,
    pub d: Option<f64>,
    pub l: Option<f64>,
}

impl BoundParams {
    /// Parameters with `μ` replaced by its upper bound `r`.
    pub fn from_rates(rates: &Rates, e0_norm_sq: f64) -> BoundParams {
        BoundParams {
            r: rates.r,
            mu: rates.r,
            eta: rates.eta,
            mu_p: BTreeMap::from([(1, rates.r)]),
            eta_p: BTreeMap::from([(1, rates.eta)]),
            rho: rates.rho,
            alpha: rates.alpha,
            e0_norm_sq,
            d: None,
            l: None,
        }
    }

    /// Computes `μ_p`, `η_p` for `p = 1..=p_max` and sets `μ = μ₂`.
    pub fn with_lifted(mut self, family: &ProjectorFamily, p_max: usize, opts: &SpectralOptions) -> Result<Self> {
        for p in 1..=p_max {
            let ext = lifted_extremes(family, p, opts)?;
            self.mu_p.insert(p, ext.mu);
            self.eta_p.insert(p, ext.eta);
            if p == 2 {
                self.mu = ext.mu;
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    pub applicable: bool,
    /// The value is a probability bound greater than 1.
    pub vacuous: bool,
    pub reason: Option<String>,
}

impl BoundValue {
    fn probability(value: f64) -> BoundValue {
        BoundValue {
            value,
            applicable: true,
            vacuous: value > 1.0,
            reason: (value > 1.0).then(|| "exceeds 1".to_string()),
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

fn powk(x: f64, k: usize) -> f64 {
    x.powi(k as i32)
}

pub fn variance_bound(params: &BoundParams, k: usize, form: VarianceForm) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let lower = match form {
        VarianceForm::Safe => powk(params.eta, 2 * k),
        VarianceForm::Paper => powk(params.eta, k),
    };
    (powk(params.mu, k) - lower) * params.e0_norm_sq * params.e0_norm_sq
}

/// Chebyshev half-width `sqrt(variance_bound / eps)`.
pub fn chebyshev_interval(params: &BoundParams, k: usize, eps: f64, form: VarianceForm) -> Result<f64> {
    check_eps(eps)?;
    Ok((variance_bound(params, k, form).max(0.0) / eps).sqrt())
}

/// `r^k d_0² / t`.
pub fn markov_bound(r: f64, k: usize, d0_sq: f64, t: f64) -> Result<BoundValue> {
    if !(t > 0.0) {
        return Err(Error::invalid("markov_bound: t must be positive"));
    }
    Ok(BoundValue::probability(powk(r, k) * d0_sq / t))
}

/// Envelope multiplier `1/eps`: with probability at least `1 - eps`,
/// `‖e_k‖² <= eps⁻¹ ρ^k ‖e_0‖²` for all `k` simultaneously.
pub fn trajectory_markov_bound(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(1.0 / eps)
}

/// `eps⁻¹ ρ^t ‖e_0‖²` for `t = 0..=k`.
pub fn trajectory_envelope(rho: f64, eps: f64, e0_norm_sq: f64, k: usize) -> Result<Vec<f64>> {
    let mult = trajectory_markov_bound(eps)?;
    Ok((0..=k).map(|t| mult * powk(rho, t) * e0_norm_sq).collect())
}

/// `exp(-k(1-ρ) + α sqrt(2k ln(1/eps)))`, the multiple of `‖e_0‖²` bounding
/// `sup_{t<=k} ‖e_t‖²` with probability at least `1 - eps`.
pub fn azuma_bound(rho: f64, alpha: f64, k: usize, eps: f64) -> Result<BoundValue> {
    if !(alpha >= 1.0) {
        return Err(Error::invalid("azuma_bound: alpha must be >= 1"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("azuma_bound: eps must lie in (0, 1), got {eps}")));
    }
    let kf = k as f64;
    let value = (-kf * (1.0 - rho) + alpha * (2.0 * kf * (1.0 / eps).ln()).sqrt()).exp();
    Ok(BoundValue {
        value,
        applicable: true,
        vacuous: value > 1.0,
        reason: (value > 1.0).then(|| "envelope exceeds the initial error".to_string()),
    })
}

/// Matrix concentration comparison bound on `‖e_k - E e_k‖²`:
/// `n ρ^k exp(-t² / (2ek‖e_0‖²(ρ + 2 + 1/ρ)))`, applicable when `t²` is at
/// least the denominator.
pub fn matrix_conc_bound(rho: f64, n: usize, k: usize, e0_norm_sq: f64, t: f64) -> BoundValue {
    if !(rho > 0.0 && rho < 1.0) || !(t > 0.0) {
        return BoundValue {
            value: f64::NAN,
            applicable: false,
            vacuous: false,
            reason: Some("requires 0 < rho < 1 and t > 0".into()),
        };
    }
    if k == 0 {
        return BoundValue::probability(0.0);
    }
    let threshold = 2.0 * std::f64::consts::E * k as f64 * e0_norm_sq * (rho + 2.0 + 1.0 / rho);
    if t * t < threshold {
        return BoundValue {
            value: f64::NAN,
            applicable: false,
            vacuous: false,
            reason: Some(format!("needs t² >= {threshold:.6e}")),
        };
    }
    BoundValue::probability(n as f64 * powk(rho, k) * (-(t * t) / threshold).exp())
}

/// `r = 1 - 1/(L² ‖A‖²_F)`.
pub fn hoffman_rate(l: f64, fro_norm_sq: f64) -> Result<f64> {
    if !(l > 0.0) || !(fro_norm_sq > 0.0) {
        return Err(Error::invalid("hoffman_rate: L and ‖A‖_F² must be positive"));
    }
    Ok((1.0 - 1.0 / (l * l * fro_norm_sq)).max(0.0))
}

/// `D² r^k d_0²`.
pub fn nonlinear_variance_bound(r: f64, k: usize, d: f64, d0_sq: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) || !(d >= 0.0) {
        return Err(Error::invalid("nonlinear_variance_bound: need 0 <= r <= 1 and D >= 0"));
    }
    Ok(d * d * powk(r, k) * d0_sq)
}

/// `lines^{-(k-1)}`: lower bound on the probability that the squared error
/// exceeds its mean by a small enough margin, for unit-norm lines.
pub fn anticoncentration_floor(lines: usize, k: usize) -> Result<f64> {
    if k == 0 || lines == 0 {
        return Err(Error::invalid("anticoncentration_floor: need k >= 1 and at least one line"));
    }
    Ok((lines as f64).powi(-((k - 1) as i32)))
}

/// `(η_p^k ‖e_0‖^{2p}, μ_p^k ‖e_0‖^{2p})`.
pub fn moment_bounds(params: &BoundParams, p: usize, k: usize) -> Result<(f64, f64)> {
    let missing = || {
        Error::Unsupported(format!(
            "μ_{p} is not available; lifted moments for p >= 3 are limited to n^p <= {EXPLICIT_LIMIT}"
        ))
    };
    let mu = *params.mu_p.get(&p).ok_or_else(missing)?;
    let eta = *params.eta_p.get(&p).ok_or_else(missing)?;
    let scale = params.e0_norm_sq.powi(p as i32);
    Ok((powk(eta, k) * scale, powk(mu, k) * scale))
}
