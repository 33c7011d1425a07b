//! Seeded Monte-Carlo ensembles of trajectories, their empirical statistics,
//! envelope coverage, and the exact brute-force moment oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{chebyshev_interval, BoundParams, VarianceForm};
use crate::error::{Error, Result};
use crate::rng::child_seed;
use crate::solvers::{IterState, Method, Problem, Sampling, Trajectory, TrajectoryRunner};

/// Largest number of index sequences [`brute_force_moments`] will walk.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialEnsemble {
    pub method: Method,
    pub sampling: Sampling,
    pub iterations: usize,
    pub master_seed: u64,
    /// Hex SHA-256 of the method, sampling, `A`, `b` and `x0`.
    pub fingerprint: String,
    pub trajectories: Vec<Trajectory>,
}

impl TrialEnsemble {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Squared errors of every trial at iteration `t`.
    pub fn column(&self, t: usize) -> Vec<f64> {
        self.trajectories.iter().map(|tr| tr.error_sq[t]).collect()
    }
}

pub fn fingerprint(problem: Problem<'_>, method: Method, sampling: Sampling, x0: &[f64]) -> String {
    let a = problem.matrix();
    let mut h = Sha256::new();
    h.update(method.name().as_bytes());
    h.update([sampling as u8]);
    h.update((a.rows() as u64).to_le_bytes());
    h.update((a.cols() as u64).to_le_bytes());
    for v in a.as_slice().iter().chain(problem.rhs()).chain(x0) {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `n_trials` independent trajectories; trial `i` uses
/// `child_seed(master_seed, i)`. Trials run in parallel and are returned in
/// index order.
pub fn run_trials(
    problem: Problem<'_>,
    method: Method,
    x0: &[f64],
    k: usize,
    n_trials: usize,
    sampling: Sampling,
    master_seed: u64,
) -> Result<TrialEnsemble> {
    if n_trials == 0 {
        return Err(Error::invalid("run_trials: need at least one trial"));
    }
    let runner = TrajectoryRunner::new(problem, method, x0, sampling)?;
    let trajectories: Vec<Trajectory> = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| runner.run(k, child_seed(master_seed, i)))
        .collect();
    Ok(TrialEnsemble {
        method,
        sampling,
        iterations: k,
        master_seed,
        fingerprint: fingerprint(problem, method, sampling, x0),
        trajectories,
    })
}

/// Sample mean and unbiased variance (zero for a single value).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let Some(&shift) = xs.first() else {
        return (f64::NAN, f64::NAN);
    };
    let mean = shift + xs.iter().map(|x| x - shift).sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Nearest-rank quantile of sorted data: the value at rank `ceil(level * N)`.
pub fn nearest_rank(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let rank = ((level * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Center {
    /// Ensemble mean at each iteration.
    #[default]
    Empirical,
    /// Mean bound `r^t ‖e_0‖²`.
    Envelope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiBand {
    pub eps: f64,
    pub form: VarianceForm,
    pub center: Center,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub emp_mean: Vec<f64>,
    pub emp_var: Vec<f64>,
    pub mean_bound: Vec<f64>,
    pub quantile_levels: Vec<f64>,
    /// `quantiles[j][t]` is the level-`j` quantile at iteration `t`.
    pub quantiles: Vec<Vec<f64>>,
    pub bands: Vec<CiBand>,
}

/// Per-iteration statistics plus Chebyshev bands `center ± half-width` for
/// every combination of `eps_levels` and `forms`.
pub fn summarize(
    ens: &TrialEnsemble,
    quantile_levels: &[f64],
    eps_levels: &[f64],
    params: &BoundParams,
    forms: &[VarianceForm],
    center: Center,
) -> Result<EnsembleSummary> {
    if ens.is_empty() {
        return Err(Error::invalid("summarize: empty ensemble"));
    }
    if quantile_levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return Err(Error::invalid("quantile levels must lie in (0, 1)"));
    }
    if quantile_levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("quantile levels must be sorted"));
    }
    let k = ens.iterations;
    let mut emp_mean = Vec::with_capacity(k + 1);
    let mut emp_var = Vec::with_capacity(k + 1);
    let mut quantiles = vec![Vec::with_capacity(k + 1); quantile_levels.len()];
    for t in 0..=k {
        let mut col = ens.column(t);
        let (m, v) = mean_var(&col);
        emp_mean.push(m);
        emp_var.push(v);
        col.sort_by(f64::total_cmp);
        for (j, &l) in quantile_levels.iter().enumerate() {
            quantiles[j].push(nearest_rank(&col, l));
        }
    }
    let mean_bound: Vec<f64> = (0..=k)
        .map(|t| params.r.powi(t as i32) * params.e0_norm_sq)
        .collect();
    let mut bands = Vec::new();
    for &form in forms {
        for &eps in eps_levels {
            let centers = match center {
                Center::Empirical => &emp_mean,
                Center::Envelope => &mean_bound,
            };
            let mut lo = Vec::with_capacity(k + 1);
            let mut hi = Vec::with_capacity(k + 1);
            for (t, c) in centers.iter().enumerate() {
                let h = chebyshev_interval(params, t, eps, form)?;
                lo.push(c - h);
                hi.push(c + h);
            }
            bands.push(CiBand {
                eps,
                form,
                center,
                lo,
                hi,
            });
        }
    }
    Ok(EnsembleSummary {
        emp_mean,
        emp_var,
        mean_bound,
        quantile_levels: quantile_levels.to_vec(),
        quantiles,
        bands,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageMode {
    PerIteration,
    TrajectorySup,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coverage {
    /// Fraction of trials with `error_sq[t] <= envelope[t]`, for each `t`.
    PerIteration(Vec<f64>),
    /// Fraction of trials staying under the envelope at every `t`.
    TrajectorySup(f64),
}

pub fn coverage(ens: &TrialEnsemble, envelope: &[f64], mode: CoverageMode) -> Result<Coverage> {
    if envelope.len() != ens.iterations + 1 {
        return Err(Error::Dimension(format!(
            "envelope has {} entries, trajectories have {}",
            envelope.len(),
            ens.iterations + 1
        )));
    }
    let n = ens.len() as f64;
    Ok(match mode {
        CoverageMode::PerIteration => Coverage::PerIteration(
            (0..envelope.len())
                .map(|t| {
                    ens.trajectories
                        .iter()
                        .filter(|tr| tr.error_sq[t] <= envelope[t])
                        .count() as f64
                        / n
                })
                .collect(),
        ),
        CoverageMode::TrajectorySup => Coverage::TrajectorySup(
            ens.trajectories
                .iter()
                .filter(|tr| tr.error_sq.iter().zip(envelope).all(|(e, b)| e <= b))
                .count() as f64
                / n,
        ),
    })
}

/// Fraction of trials inside `[lo[t] - s, hi[t] + s]` at each `t`, with
/// `s = rel_slack * max(|lo[t]|, |hi[t]|)`.
pub fn band_coverage(ens: &TrialEnsemble, lo: &[f64], hi: &[f64], rel_slack: f64) -> Vec<f64> {
    let n = ens.len() as f64;
    (0..=ens.iterations)
        .map(|t| {
            let s = rel_slack * lo[t].abs().max(hi[t].abs());
            ens.trajectories
                .iter()
                .filter(|tr| tr.error_sq[t] >= lo[t] - s && tr.error_sq[t] <= hi[t] + s)
                .count() as f64
                / n
        })
        .collect()
}

/// Exact statistics over all `lines^k` index sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    /// `moments[p - 1][t] = E‖e_t‖^{2p}`.
    pub moments: Vec<Vec<f64>>,
    /// `Var(‖e_t‖²)`, accumulated around the exact mean.
    pub variance: Vec<f64>,
    /// Sum of all sequence probabilities.
    pub total_mass: f64,
    /// `P[‖e_k‖² >= ‖e_1‖² - 1e-12 ‖e_0‖²]`; `None` for `k = 0`.
    pub prob_final_ge_first: Option<f64>,
    /// `P[‖e_k‖² > E‖e_k‖² + 1e-12 ‖e_0‖²]`.
    pub prob_final_above_mean: f64,
    /// Mass of sequences with `‖e_t‖² > envelope[t]` for some `t`.
    pub envelope_violation_mass: Option<f64>,
    pub sequences: u128,
}

struct Walk<'r, 'a> {
    runner: &'r TrajectoryRunner<'a>,
    weights: &'r [f64],
    k: usize,
    p_max: usize,
    envelope: Option<&'r [f64]>,
    e0: f64,
    // first pass
    moments: Vec<Vec<f64>>,
    mass: f64,
    ge_first: f64,
    violation: f64,
    // second pass
    means: Vec<f64>,
    centered: Vec<f64>,
    above_mean: f64,
}

impl Walk<'_, '_> {
    fn violates(&self, t: usize, e: f64) -> bool {
        self.envelope.is_some_and(|env| e > env[t] * (1.0 + 1e-12))
    }

    fn first(&mut self, state: &IterState, t: usize, prob: f64, e1: f64, violated: bool) {
        let e = self.runner.error_sq(state);
        let violated = violated || self.violates(t, e);
        let mut pow = 1.0;
        for p in 0..self.p_max {
            pow *= e;
            self.moments[p][t] += prob * pow;
        }
        let e1 = if t == 1 { e } else { e1 };
        if t == self.k {
            self.mass += prob;
            if self.k >= 1 && e >= e1 - 1e-12 * self.e0 {
                self.ge_first += prob;
            }
            if violated {
                self.violation += prob;
            }
            return;
        }
        for (i, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let mut child = state.clone();
            self.runner.step(&mut child, i);
            self.first(&child, t + 1, prob * w, e1, violated);
        }
    }

    fn second(&mut self, state: &IterState, t: usize, prob: f64) {
        let e = self.runner.error_sq(state);
        let d = e - self.means[t];
        self.centered[t] += prob * d * d;
        if t == self.k {
            if d > 1e-12 * self.e0 {
                self.above_mean += prob;
            }
            return;
        }
        for (i, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let mut child = state.clone();
            self.runner.step(&mut child, i);
            self.second(&child, t + 1, prob * w);
        }
    }
}

/// Walks every index sequence of length `k` depth first, reusing parent
/// iterates, and accumulates exact moments for `p = 1..=p_max`.
pub fn brute_force_moments(
    problem: Problem<'_>,
    method: Method,
    x0: &[f64],
    k: usize,
    p_max: usize,
    sampling: Sampling,
    envelope: Option<&[f64]>,
) -> Result<BruteForce> {
    if p_max == 0 {
        return Err(Error::invalid("brute_force_moments: p_max must be >= 1"));
    }
    if let Some(env) = envelope {
        if env.len() != k + 1 {
            return Err(Error::Dimension(format!("envelope needs {} entries", k + 1)));
        }
    }
    let runner = TrajectoryRunner::new(problem, method, x0, sampling)?;
    let lines = runner.sampler().len() as u128;
    let sequences = lines
        .checked_pow(k as u32)
        .filter(|&s| s <= ENUMERATION_LIMIT)
        .ok_or(Error::SizeGuard {
            what: "index sequences lines^k",
            required: lines.saturating_pow(k.min(64) as u32),
            limit: ENUMERATION_LIMIT,
        })?;
    let weights = runner.sampler().weights().to_vec();
    let root = runner.initial_state();
    let e0 = runner.error_sq(&root);
    let mut walk = Walk {
        runner: &runner,
        weights: &weights,
        k,
        p_max,
        envelope,
        e0,
        moments: vec![vec![0.0; k + 1]; p_max],
        mass: 0.0,
        ge_first: 0.0,
        violation: 0.0,
        means: Vec::new(),
        centered: vec![0.0; k + 1],
        above_mean: 0.0,
    };
    walk.first(&root, 0, 1.0, f64::NAN, false);
    walk.means = walk.moments[0].clone();
    walk.second(&root, 0, 1.0);
    Ok(BruteForce {
        moments: walk.moments,
        variance: walk.centered,
        total_mass: walk.mass,
        prob_final_ge_first: (k >= 1).then_some(walk.ge_first),
        prob_final_above_mean: walk.above_mean,
        envelope_violation_mass: envelope.map(|_| walk.violation),
        sequences,
    })
}
