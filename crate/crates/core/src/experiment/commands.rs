//! The experiment commands behind the CLI. Each one is a pure function of
//! its configuration and writes its CSV files in a fixed order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    anticoncentration_floor, azuma_bound, chebyshev_interval, family_for, lifted_extremes, log_r_mu, markov_bound,
    matrix_conc_bound, rates_for, rk_rates, trajectory_markov_bound, variance_bound, BoundParams, BoundValue, Rates,
    VarianceForm,
};
use crate::eigen::SpectralOptions;
use crate::ensemble::{run_trials, summarize, EnsembleSummary, TrialEnsemble};
use crate::error::{Error, Result};
use crate::generate::{gaussian_matrix, normalize};
use crate::kron::ProjectorFamily;
use crate::matrix::{Axis, DenseMatrix};
use crate::mtx::save_matrix_market;
use crate::rng::child_seed;
use crate::solvers::{Method, Problem, Sampling};

use super::config::{ExperimentConfig, MuGridConfig, MuSource};

pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// 17 significant digits; non-finite values as `nan`, `inf`, `-inf`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let to_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(to_err)?;
    w.write_record(header).map_err(to_err)?;
    for r in rows {
        w.write_record(r).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Percent label of a confidence level: `eps = 0.05` gives `95`.
pub fn ci_label(eps: f64) -> String {
    format!("{}", (100.0 * (1.0 - eps)).round() as i64)
}

/// Bound parameters for a configured experiment, with `μ` computed or
/// replaced by `r` as the config asks.
pub fn experiment_params(
    a: &DenseMatrix,
    method: Method,
    sampling: Sampling,
    mu: MuSource,
    e0_norm_sq: f64,
) -> Result<(Rates, BoundParams)> {
    let rates = rates_for(a, method, sampling)?;
    let mut params = BoundParams::from_rates(&rates, e0_norm_sq);
    if mu == MuSource::Computed {
        let family = family_for(a, method, sampling)?;
        params = params.with_lifted(&family, 2, &SpectralOptions::default())?;
    }
    Ok((rates, params))
}

#[derive(Debug, Clone)]
pub struct TrialsOutcome {
    pub trajectory_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub params: BoundParams,
    pub ensemble: TrialEnsemble,
    pub summary: EnsembleSummary,
}

/// Runs the configured ensemble and writes `trajectory.csv` and
/// `summary.csv` into `out_dir`.
pub fn cmd_trials(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TrialsOutcome> {
    cfg.validate()?;
    let (sys, x0) = cfg.build_system()?;
    let method = cfg.solver.method;
    let sampling = cfg.solver.sampling;
    let ens = run_trials(
        Problem::Linear(&sys),
        method,
        &x0,
        cfg.trials.iterations,
        cfg.trials.count,
        sampling,
        cfg.trials.master_seed,
    )?;
    let e0 = ens.trajectories[0].error_sq[0];
    let (_, params) = experiment_params(&sys.a, method, sampling, cfg.bounds.mu, e0)?;
    let summary = summarize(
        &ens,
        &QUANTILE_LEVELS,
        &cfg.bounds.eps,
        &params,
        &cfg.bounds.forms,
        cfg.bounds.center,
    )?;

    prepare_dir(out_dir)?;
    let trajectory_csv = out_dir.join("trajectory.csv");
    let mut rows = Vec::with_capacity(ens.len() * (ens.iterations + 1));
    for (i, tr) in ens.trajectories.iter().enumerate() {
        for (k, e) in tr.error_sq.iter().enumerate() {
            rows.push(vec![i.to_string(), k.to_string(), fmt_num(*e)]);
        }
    }
    let header = ["trial", "k", "error_sq"].map(String::from);
    write_csv(&trajectory_csv, &header, &rows)?;

    let summary_csv = out_dir.join("summary.csv");
    let mut header: Vec<String> = ["k", "emp_mean", "emp_var", "mean_bound", "q05", "q25", "q50", "q75", "q95"]
        .map(String::from)
        .to_vec();
    for band in &summary.bands {
        let suffix = if Some(&band.form) == cfg.bounds.forms.first() {
            String::new()
        } else {
            format!("_{}", band.form.name())
        };
        let label = ci_label(band.eps);
        header.push(format!("ci{label}_lo{suffix}"));
        header.push(format!("ci{label}_hi{suffix}"));
    }
    let rows: Vec<Vec<String>> = (0..=ens.iterations)
        .map(|t| {
            let mut r = vec![
                t.to_string(),
                fmt_num(summary.emp_mean[t]),
                fmt_num(summary.emp_var[t]),
                fmt_num(summary.mean_bound[t]),
            ];
            r.extend(summary.quantiles.iter().map(|q| fmt_num(q[t])));
            for band in &summary.bands {
                r.push(fmt_num(band.lo[t]));
                r.push(fmt_num(band.hi[t]));
            }
            r
        })
        .collect();
    write_csv(&summary_csv, &header, &rows)?;

    Ok(TrialsOutcome {
        trajectory_csv,
        summary_csv,
        params,
        ensemble: ens,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareCell {
    pub k: usize,
    pub t: f64,
    pub chebyshev_paper: f64,
    pub chebyshev_safe: f64,
    pub markov: f64,
    pub matrix_conc: BoundValue,
}

/// Probability bounds on deviations of size `t` for every `(k, t)` cell,
/// with `‖e_0‖² = 1`. Writes `bound_compare.csv`.
pub fn cmd_heatmap_compare(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(PathBuf, Vec<CompareCell>)> {
    cfg.validate()?;
    let a = cfg.build_matrix()?;
    let method = cfg.solver.method;
    let (_, params) = experiment_params(&a, method, cfg.solver.sampling, cfg.bounds.mu, 1.0)?;
    let dim = if method == Method::Rgs { a.rows().min(a.cols()) } else { a.cols() };
    let grid = cfg.heatmap();
    let mut cells = Vec::with_capacity(grid.k.len() * grid.t.len());
    for &k in &grid.k {
        for &t in &grid.t {
            cells.push(CompareCell {
                k,
                t,
                chebyshev_paper: variance_bound(&params, k, VarianceForm::Paper) / (t * t),
                chebyshev_safe: variance_bound(&params, k, VarianceForm::Safe) / (t * t),
                markov: markov_bound(params.r, k, 1.0, t)?.value,
                matrix_conc: matrix_conc_bound(params.rho, dim, k, 1.0, t),
            });
        }
    }
    prepare_dir(out_dir)?;
    let path = out_dir.join("bound_compare.csv");
    let header = [
        "k",
        "t",
        "chebyshev_paper",
        "chebyshev_safe",
        "markov",
        "matrix_conc",
        "matrix_conc_applicable",
    ]
    .map(String::from);
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.k.to_string(),
                fmt_num(c.t),
                fmt_num(c.chebyshev_paper),
                fmt_num(c.chebyshev_safe),
                fmt_num(c.markov),
                if c.matrix_conc.applicable {
                    fmt_num(c.matrix_conc.value)
                } else {
                    String::new()
                },
                c.matrix_conc.applicable.to_string(),
            ]
        })
        .collect();
    write_csv(&path, &header, &rows)?;
    Ok((path, cells))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuCell {
    pub m: usize,
    pub n: usize,
    /// Average of `ln μ / ln r`; 0 when `m < n`, NaN when some `r = 1`.
    pub avg_log_r_mu: f64,
    pub mu_mean: f64,
    pub r_mean: f64,
    pub note: Option<String>,
}

/// `log_r μ` for one row-normalized Gaussian matrix: `(log, μ, r)`.
pub fn log_r_mu_sample(a: &DenseMatrix) -> Result<(f64, f64, f64)> {
    let rates = rk_rates(a)?;
    let family = ProjectorFamily::rk(a, Sampling::NormSquared)?;
    let ext = lifted_extremes(&family, 2, &SpectralOptions::default())?;
    let log = if a.rows() < a.cols() {
        0.0
    } else if rates.r_deficit == 0.0 {
        f64::NAN
    } else {
        log_r_mu(ext.mu_deficit, rates.r_deficit)
    };
    Ok((log, ext.mu, rates.r))
}

/// Averages `log_r μ` over `trials` row-normalized Gaussian matrices per
/// `(m, n)` cell and writes `mu_heatmap.csv`.
pub fn cmd_heatmap_mu(grid: &MuGridConfig, out_dir: &Path) -> Result<(PathBuf, Vec<MuCell>)> {
    grid.validate()?;
    let shapes: Vec<(usize, usize, usize)> = grid
        .m
        .iter()
        .flat_map(|&m| grid.n.iter().map(move |&n| (m, n)))
        .enumerate()
        .map(|(c, (m, n))| (c, m, n))
        .collect();
    let jobs: Vec<(usize, usize, usize, usize)> = shapes
        .iter()
        .flat_map(|&(c, m, n)| (0..grid.trials).map(move |i| (c, m, n, i)))
        .collect();
    let samples: Vec<(f64, f64, f64)> = jobs
        .par_iter()
        .map(|&(c, m, n, i)| {
            let seed = child_seed(child_seed(grid.seed, c as u64), i as u64);
            let a = normalize(&gaussian_matrix(m, n, grid.std, seed)?, Axis::Row)?;
            log_r_mu_sample(&a)
        })
        .collect::<Result<_>>()?;
    let tf = grid.trials as f64;
    let cells: Vec<MuCell> = shapes
        .iter()
        .map(|&(c, m, n)| {
            let s = &samples[c * grid.trials..(c + 1) * grid.trials];
            let stalled = m >= n && s.iter().any(|x| x.0.is_nan());
            MuCell {
                m,
                n,
                avg_log_r_mu: if m < n { 0.0 } else { s.iter().map(|x| x.0).sum::<f64>() / tf },
                mu_mean: s.iter().map(|x| x.1).sum::<f64>() / tf,
                r_mean: s.iter().map(|x| x.2).sum::<f64>() / tf,
                note: stalled.then(|| "rank-deficient sample with r = 1; ln r = 0".to_string()),
            }
        })
        .collect();
    prepare_dir(out_dir)?;
    let path = out_dir.join("mu_heatmap.csv");
    let header = ["m", "n", "avg_log_r_mu", "mu_mean", "r_mean"].map(String::from);
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.m.to_string(),
                c.n.to_string(),
                fmt_num(c.avg_log_r_mu),
                fmt_num(c.mu_mean),
                fmt_num(c.r_mean),
            ]
        })
        .collect();
    write_csv(&path, &header, &rows)?;
    Ok((path, cells))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub method: Method,
    pub rows: usize,
    pub cols: usize,
    pub mu_source: MuSource,
    pub params: BoundParams,
    pub k: usize,
    pub t: f64,
    pub eps: f64,
    pub variance_safe: f64,
    pub variance_paper: f64,
    pub chebyshev_safe: f64,
    pub chebyshev_paper: f64,
    pub markov: BoundValue,
    pub trajectory_multiplier: f64,
    pub trajectory_envelope_k: f64,
    pub azuma: BoundValue,
    pub matrix_conc: BoundValue,
    pub anticoncentration_floor: Option<f64>,
}

/// Every bound at a single `(k, t, eps)`.
pub fn cmd_bounds(cfg: &ExperimentConfig, k: usize, t: f64, eps: f64) -> Result<BoundsReport> {
    cfg.validate()?;
    let (sys, x0) = cfg.build_system()?;
    let method = cfg.solver.method;
    let e0 = match method {
        Method::Rgs => {
            let r = sys.residual(&x0)?;
            r.iter().map(|v| v * v).sum()
        }
        _ => {
            let xs = sys.x_star.as_ref().expect("planted");
            x0.iter().zip(xs).map(|(a, b)| (a - b) * (a - b)).sum()
        }
    };
    let (_, params) = experiment_params(&sys.a, method, cfg.solver.sampling, cfg.bounds.mu, e0)?;
    let dim = if method == Method::Rgs {
        sys.a.rows().min(sys.a.cols())
    } else {
        sys.a.cols()
    };
    let lines = match method {
        Method::Rgs => sys.a.cols(),
        _ => sys.a.rows(),
    };
    let mult = trajectory_markov_bound(eps)?;
    Ok(BoundsReport {
        method,
        rows: sys.a.rows(),
        cols: sys.a.cols(),
        mu_source: cfg.bounds.mu,
        k,
        t,
        eps,
        variance_safe: variance_bound(&params, k, VarianceForm::Safe),
        variance_paper: variance_bound(&params, k, VarianceForm::Paper),
        chebyshev_safe: chebyshev_interval(&params, k, eps, VarianceForm::Safe)?,
        chebyshev_paper: chebyshev_interval(&params, k, eps, VarianceForm::Paper)?,
        markov: markov_bound(params.r, k, e0, t)?,
        trajectory_multiplier: mult,
        trajectory_envelope_k: mult * params.rho.powi(k as i32) * e0,
        azuma: azuma_bound(params.rho, params.alpha, k, eps.min(1.0 - f64::EPSILON))?,
        matrix_conc: matrix_conc_bound(params.rho, dim, k, e0, t),
        anticoncentration_floor: (k >= 1).then(|| anticoncentration_floor(lines, k)).transpose()?,
        params,
    })
}

fn flag(v: &BoundValue) -> String {
    match (&v.applicable, &v.vacuous) {
        (false, _) => format!("not applicable ({})", v.reason.as_deref().unwrap_or("")),
        (true, true) => format!("{}  [vacuous]", fmt_num(v.value)),
        (true, false) => fmt_num(v.value),
    }
}

impl BoundsReport {
    pub fn render(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "method            {}", self.method.name());
        let _ = writeln!(s, "matrix            {} x {}", self.rows, self.cols);
        let _ = writeln!(s, "k, t, eps         {}, {}, {}", self.k, fmt_num(self.t), self.eps);
        let _ = writeln!(s, "|e0|^2            {}", fmt_num(p.e0_norm_sq));
        let _ = writeln!(s, "r                 {}", fmt_num(p.r));
        let src = match self.mu_source {
            MuSource::Computed => "computed",
            MuSource::Rate => "upper bound r",
        };
        let _ = writeln!(s, "mu                {}  ({src})", fmt_num(p.mu));
        let _ = writeln!(s, "eta               {}", fmt_num(p.eta));
        let _ = writeln!(s, "rho               {}", fmt_num(p.rho));
        let _ = writeln!(s, "alpha             {}", fmt_num(p.alpha));
        for (q, v) in &p.mu_p {
            let _ = writeln!(s, "mu_{q}              {}", fmt_num(*v));
        }
        let _ = writeln!(s, "variance (safe)   {}", fmt_num(self.variance_safe));
        let _ = writeln!(s, "variance (paper)  {}", fmt_num(self.variance_paper));
        let _ = writeln!(s, "chebyshev half-width (safe)   {}", fmt_num(self.chebyshev_safe));
        let _ = writeln!(s, "chebyshev half-width (paper)  {}", fmt_num(self.chebyshev_paper));
        let _ = writeln!(s, "markov P[|e_k|^2 >= t]        {}", flag(&self.markov));
        let _ = writeln!(s, "trajectory multiplier 1/eps   {}", fmt_num(self.trajectory_multiplier));
        let _ = writeln!(s, "trajectory envelope at k      {}", fmt_num(self.trajectory_envelope_k));
        let _ = writeln!(s, "azuma multiplier              {}", flag(&self.azuma));
        let _ = writeln!(s, "matrix concentration          {}", flag(&self.matrix_conc));
        if let Some(f) = self.anticoncentration_floor {
            let _ = writeln!(s, "anticoncentration floor       {}", fmt_num(f));
        }
        s
    }
}

/// Writes the configured (normalized) matrix to `matrix.mtx`.
pub fn cmd_gen_matrix(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    let a = cfg.build_matrix()?;
    prepare_dir(out_dir)?;
    let path = out_dir.join("matrix.mtx");
    save_matrix_market(&a, &path)?;
    Ok(path)
}
