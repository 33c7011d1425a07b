//! Randomized Kaczmarz (RK), randomized Gauss-Seidel (RGS) and RK for linear
//! feasibility, plus the trajectory runner that records the squared error of
//! every iterate.
//!
//! Error metrics: `‖x_t - x*‖²` for RK, the residual `‖A x_t - b‖²` for RGS and
//! `d(x_t, S)²` for RK on inequalities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::{InequalitySystem, LinearSystem};
use crate::kron::validate_probabilities;
use crate::matrix::{axis_norms, axpy, dot, norm_sq, Axis, DenseMatrix};
use crate::rng::SeededStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Probability proportional to the squared line norm.
    #[default]
    NormSquared,
    Uniform,
}

impl Sampling {
    /// Sampling probabilities for lines with the given Euclidean norms.
    pub fn weights(self, norms: &[f64]) -> Vec<f64> {
        match self {
            Sampling::NormSquared => {
                let total: f64 = norms.iter().map(|v| v * v).sum();
                norms.iter().map(|v| v * v / total).collect()
            }
            Sampling::Uniform => vec![1.0 / norms.len() as f64; norms.len()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk,
    Rgs,
    RkIneq,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk => "rk",
            Method::Rgs => "rgs",
            Method::RkIneq => "rk-ineq",
        }
    }

    /// Rows for RK and RK-ineq, columns for RGS.
    pub fn axis(self) -> Axis {
        match self {
            Method::Rgs => Axis::Col,
            _ => Axis::Row,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk" => Ok(Method::Rk),
            "rgs" => Ok(Method::Rgs),
            "rk-ineq" => Ok(Method::RkIneq),
            _ => Err(Error::invalid(format!("unknown method '{s}'"))),
        }
    }
}

/// Discrete distribution over line indices, sampled by binary search on the
/// cumulative weights. The random stream is passed in by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSampler {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl RowSampler {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        validate_probabilities(&weights)?;
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let total = acc;
        cumulative.iter_mut().for_each(|c| *c /= total);
        let last_positive = weights.iter().rposition(|&w| w > 0.0).expect("validated");
        Ok(RowSampler {
            weights,
            cumulative,
            last_positive,
        })
    }

    pub fn for_matrix(a: &DenseMatrix, axis: Axis, sampling: Sampling) -> Result<Self> {
        Self::new(sampling.weights(&axis_norms(a, axis)))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Index `i` with probability `weights[i]`; consumes one uniform.
    pub fn sample_index(&self, stream: &mut SeededStream) -> usize {
        self.index_for(stream.uniform())
    }

    fn index_for(&self, u: f64) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.last_positive)
    }
}

fn check_index(i: usize, len: usize, what: &str) -> Result<()> {
    if i >= len {
        return Err(Error::invalid(format!("{what} index {i} out of range for {len}")));
    }
    Ok(())
}

/// One Kaczmarz projection onto `{y : a_iᵀy = b_i}`.
pub fn rk_step(x: &[f64], a: &DenseMatrix, b: &[f64], i: usize) -> Result<Vec<f64>> {
    check_index(i, a.rows(), "row")?;
    if x.len() != a.cols() || b.len() != a.rows() {
        return Err(Error::Dimension("rk_step: x or b has the wrong length".into()));
    }
    let row = a.row(i);
    let ns = norm_sq(row);
    if ns == 0.0 {
        return Err(Error::ZeroLine { axis: "row", index: i });
    }
    let mut out = x.to_vec();
    project_row(&mut out, row, b[i], ns, false);
    Ok(out)
}

/// One Gauss-Seidel coordinate update on column `j`.
pub fn rgs_step(x: &[f64], a: &DenseMatrix, b: &[f64], j: usize) -> Result<Vec<f64>> {
    check_index(j, a.cols(), "column")?;
    if x.len() != a.cols() || b.len() != a.rows() {
        return Err(Error::Dimension("rgs_step: x or b has the wrong length".into()));
    }
    let col = a.col(j);
    let ns = norm_sq(&col);
    if ns == 0.0 {
        return Err(Error::ZeroLine { axis: "column", index: j });
    }
    let mut r = a.matvec(x)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    let mut out = x.to_vec();
    out[j] -= dot(&col, &r) / ns;
    Ok(out)
}

/// One step of RK for feasibility: an equality row projects as in
/// [`rk_step`]; an inequality row projects only when strictly violated.
pub fn rk_ineq_step(x: &[f64], sys: &InequalitySystem, i: usize) -> Result<Vec<f64>> {
    check_index(i, sys.a.rows(), "row")?;
    if x.len() != sys.a.cols() {
        return Err(Error::Dimension("rk_ineq_step: x has the wrong length".into()));
    }
    let row = sys.a.row(i);
    let mut out = x.to_vec();
    project_row(&mut out, row, sys.b[i], norm_sq(row), sys.is_leq(i));
    Ok(out)
}

#[inline]
fn project_row(x: &mut [f64], row: &[f64], bi: f64, row_norm_sq: f64, positive_part: bool) {
    let mut viol = dot(row, x) - bi;
    if positive_part && viol <= 0.0 {
        return;
    }
    if positive_part {
        viol = viol.max(0.0);
    }
    axpy(-viol / row_norm_sq, row, x);
}

#[derive(Debug, Clone, Copy)]
pub enum Problem<'a> {
    Linear(&'a LinearSystem),
    Inequality(&'a InequalitySystem),
}

impl<'a> Problem<'a> {
    pub fn matrix(&self) -> &'a DenseMatrix {
        match self {
            Problem::Linear(s) => &s.a,
            Problem::Inequality(s) => &s.a,
        }
    }

    pub fn rhs(&self) -> &'a [f64] {
        match self {
            Problem::Linear(s) => &s.b,
            Problem::Inequality(s) => &s.b,
        }
    }
}

impl<'a> From<&'a LinearSystem> for Problem<'a> {
    fn from(s: &'a LinearSystem) -> Self {
        Problem::Linear(s)
    }
}

impl<'a> From<&'a InequalitySystem> for Problem<'a> {
    fn from(s: &'a InequalitySystem) -> Self {
        Problem::Inequality(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    /// `k + 1` squared errors, index 0 is the initial iterate.
    pub error_sq: Vec<f64>,
    pub indices: Vec<usize>,
    pub seed: u64,
}

impl Trajectory {
    pub fn iterations(&self) -> usize {
        self.error_sq.len() - 1
    }
}

/// Iterate plus whatever the error metric needs incrementally.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IterState {
    x: Vec<f64>,
    /// `A x - b`, maintained only for RGS.
    residual: Vec<f64>,
}

/// A validated (problem, method, x0, sampling) combination that can produce
/// any number of trajectories.
#[derive(Debug, Clone)]
pub struct TrajectoryRunner<'a> {
    problem: Problem<'a>,
    method: Method,
    x0: Vec<f64>,
    sampler: RowSampler,
    line_norm_sq: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

impl<'a> TrajectoryRunner<'a> {
    pub fn new(problem: Problem<'a>, method: Method, x0: &[f64], sampling: Sampling) -> Result<Self> {
        let a = problem.matrix();
        if x0.len() != a.cols() {
            return Err(Error::Dimension(format!(
                "x0 has {} entries, A has {} columns",
                x0.len(),
                a.cols()
            )));
        }
        if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        match (method, &problem) {
            (Method::Rk, Problem::Linear(s)) if s.x_star.is_none() => {
                return Err(Error::invalid("rk error metric needs a known solution x*"));
            }
            (Method::Rk | Method::Rgs, Problem::Linear(_)) | (Method::RkIneq, Problem::Inequality(_)) => {}
            (m, _) => {
                return Err(Error::invalid(format!(
                    "method {} does not apply to this kind of system",
                    m.name()
                )))
            }
        }
        let axis = method.axis();
        let norms = axis_norms(a, axis);
        if let Some(index) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroLine {
                axis: axis.name(),
                index,
            });
        }
        let sampler = RowSampler::new(sampling.weights(&norms))?;
        let columns = if method == Method::Rgs {
            (0..a.cols()).map(|j| a.col(j)).collect()
        } else {
            Vec::new()
        };
        Ok(TrajectoryRunner {
            problem,
            method,
            x0: x0.to_vec(),
            sampler,
            line_norm_sq: norms.iter().map(|v| v * v).collect(),
            columns,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn sampler(&self) -> &RowSampler {
        &self.sampler
    }

    pub(crate) fn initial_state(&self) -> IterState {
        let residual = if self.method == Method::Rgs {
            let a = self.problem.matrix();
            let mut r = a.matvec(&self.x0).expect("validated dims");
            for (ri, bi) in r.iter_mut().zip(self.problem.rhs()) {
                *ri -= bi;
            }
            r
        } else {
            Vec::new()
        };
        IterState {
            x: self.x0.clone(),
            residual,
        }
    }

    pub(crate) fn step(&self, state: &mut IterState, i: usize) {
        let a = self.problem.matrix();
        let b = self.problem.rhs();
        match (self.method, &self.problem) {
            (Method::Rk, _) => project_row(&mut state.x, a.row(i), b[i], self.line_norm_sq[i], false),
            (Method::RkIneq, Problem::Inequality(s)) => {
                project_row(&mut state.x, a.row(i), b[i], self.line_norm_sq[i], s.is_leq(i))
            }
            (Method::Rgs, _) => {
                let col = &self.columns[i];
                let delta = -dot(col, &state.residual) / self.line_norm_sq[i];
                state.x[i] += delta;
                axpy(delta, col, &mut state.residual);
            }
            _ => unreachable!("validated in new"),
        }
    }

    pub(crate) fn error_sq(&self, state: &IterState) -> f64 {
        match (self.method, &self.problem) {
            (Method::Rk, Problem::Linear(s)) => {
                let xs = s.x_star.as_ref().expect("validated");
                state.x.iter().zip(xs).map(|(x, y)| (x - y) * (x - y)).sum()
            }
            (Method::Rgs, _) => norm_sq(&state.residual),
            (Method::RkIneq, Problem::Inequality(s)) => s.distance(&state.x).powi(2),
            _ => unreachable!("validated in new"),
        }
    }

    /// Runs `k` iterations with indices drawn from a stream seeded by `seed`.
    pub fn run(&self, k: usize, seed: u64) -> Trajectory {
        let mut stream = SeededStream::new(seed);
        let mut state = self.initial_state();
        let mut error_sq = Vec::with_capacity(k + 1);
        let mut indices = Vec::with_capacity(k);
        error_sq.push(self.error_sq(&state));
        for _ in 0..k {
            let i = self.sampler.sample_index(&mut stream);
            self.step(&mut state, i);
            indices.push(i);
            error_sq.push(self.error_sq(&state));
        }
        Trajectory {
            method: self.method,
            error_sq,
            indices,
            seed,
        }
    }

    /// Final iterate of the run with the given seed (not recorded in
    /// [`Trajectory`] to keep ensembles light).
    pub fn final_iterate(&self, k: usize, seed: u64) -> Vec<f64> {
        let mut stream = SeededStream::new(seed);
        let mut state = self.initial_state();
        for _ in 0..k {
            let i = self.sampler.sample_index(&mut stream);
            self.step(&mut state, i);
        }
        state.x
    }
}

pub fn run_trajectory(
    problem: Problem<'_>,
    method: Method,
    x0: &[f64],
    k: usize,
    sampling: Sampling,
    seed: u64,
) -> Result<Trajectory> {
    Ok(TrajectoryRunner::new(problem, method, x0, sampling)?.run(k, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{gaussian_matrix, make_halfspace_system, normalize, plant_system};
    use crate::matrix::sub;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn i2_system() -> LinearSystem {
        LinearSystem::from_solution(DenseMatrix::identity(2).unwrap(), vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn point_mass_sampler() {
        let s = RowSampler::new(vec![1.0, 0.0, 0.0]).unwrap();
        let mut st = SeededStream::new(3);
        assert!((0..1000).all(|_| s.sample_index(&mut st) == 0));
        let s = RowSampler::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert!((0..1000).all(|_| s.sample_index(&mut st) == 2));
        assert_eq!(s.index_for(1.0 - 1e-17), 2);
    }

    #[test]
    fn trailing_zero_weight_never_drawn() {
        let s = RowSampler::new(vec![0.5, 0.5, 0.0]).unwrap();
        assert_eq!(s.index_for(0.999_999_999_999), 1);
        assert_eq!(s.index_for(0.0), 0);
    }

    #[test]
    fn sampler_rejects_bad_weights() {
        assert!(RowSampler::new(vec![0.5, 0.6]).is_err());
        assert!(RowSampler::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn uniform_sampler_frequencies() {
        let m = 5;
        let s = RowSampler::new(vec![0.2; m]).unwrap();
        let mut st = SeededStream::new(17);
        let n = 1_000_000;
        let mut counts = vec![0usize; m];
        for _ in 0..n {
            counts[s.sample_index(&mut st)] += 1;
        }
        let p: f64 = 0.2;
        let tol = 5.0 * (p * (1.0 - p) / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - p).abs() <= tol);
        }
    }

    #[test]
    fn rk_step_examples() {
        let sys = i2_system();
        let x1 = rk_step(&[0.0, 0.0], &sys.a, &sys.b, 1).unwrap();
        assert_eq!(x1, vec![0.0, 2.0]);
        assert_eq!(rk_step(&x1, &sys.a, &sys.b, 1).unwrap(), x1);
        let a = DenseMatrix::from_rows(&[[1.0, 1.0]]).unwrap();
        assert_eq!(rk_step(&[0.0, 0.0], &a, &[2.0], 0).unwrap(), vec![1.0, 1.0]);
        let z = DenseMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(rk_step(&[1.0, 1.0], &z, &[0.0, 0.0], 0), Err(Error::ZeroLine { .. })));
    }

    #[test]
    fn rgs_step_examples() {
        let sys = i2_system();
        let x1 = rgs_step(&[0.0, 0.0], &sys.a, &sys.b, 0).unwrap();
        assert_eq!(x1, vec![1.0, 0.0]);
        assert_eq!(norm_sq(&sys.residual(&x1).unwrap()), 4.0);
        assert_eq!(rgs_step(&x1, &sys.a, &sys.b, 0).unwrap(), x1);
        let a = DenseMatrix::from_rows(&[[1.0], [1.0]]).unwrap();
        assert_eq!(rgs_step(&[0.0], &a, &[1.0, 3.0], 0).unwrap(), vec![2.0]);
    }

    #[test]
    fn rk_ineq_step_examples() {
        let sys = make_halfspace_system(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(rk_ineq_step(&[0.5, 3.0], &sys, 0).unwrap(), vec![0.5, 3.0]);
        assert_eq!(rk_ineq_step(&[2.0, 0.0], &sys, 0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(rk_ineq_step(&[1.0, 5.0], &sys, 0).unwrap(), vec![1.0, 5.0]);
        let d = make_halfspace_system(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], 0.0).unwrap();
        let x = rk_ineq_step(&[1.0, 1.0], &d, 0).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn identity_trajectory_one_step() {
        let sys = i2_system();
        let x0 = vec![2.0, 3.0];
        for seed in 0..8 {
            let t = run_trajectory((&sys).into(), Method::Rk, &x0, 1, Sampling::NormSquared, seed).unwrap();
            assert_eq!(t.error_sq, vec![2.0, 1.0]);
            assert_eq!(t.indices.len(), 1);
        }
    }

    #[test]
    fn rk_errors_nonincreasing_and_deterministic() {
        let a = normalize(&gaussian_matrix(30, 5, 1.0, 2).unwrap(), Axis::Row).unwrap();
        let sys = plant_system(&a, 9).unwrap();
        let x0 = vec![0.0; 5];
        let t1 = run_trajectory((&sys).into(), Method::Rk, &x0, 200, Sampling::NormSquared, 5).unwrap();
        let t2 = run_trajectory((&sys).into(), Method::Rk, &x0, 200, Sampling::NormSquared, 5).unwrap();
        assert_eq!(t1, t2);
        let floor = 1e-24 * t1.error_sq[0];
        for w in t1.error_sq.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + floor);
        }
    }

    #[test]
    fn rk_error_follows_projector() {
        let a = gaussian_matrix(8, 4, 1.0, 1).unwrap();
        let sys = plant_system(&a, 2).unwrap();
        let xs = sys.x_star.clone().unwrap();
        let mut st = SeededStream::new(4);
        let mut x = st.normal_vec(4, 1.0);
        for i in 0..8 {
            let e = sub(&x, &xs);
            let u = a.row(i);
            let c = dot(u, &e) / norm_sq(u);
            let mut want = e.clone();
            axpy(-c, u, &mut want);
            x = rk_step(&x, &sys.a, &sys.b, i).unwrap();
            let got = sub(&x, &xs);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()));
            }
        }
    }

    #[test]
    fn rgs_residual_follows_projector() {
        let a = gaussian_matrix(6, 3, 1.0, 3).unwrap();
        let sys = plant_system(&a, 4).unwrap();
        let mut x = vec![0.3, -1.0, 2.0];
        for j in [0, 2, 1, 1, 0] {
            let r = sys.residual(&x).unwrap();
            let col = a.col(j);
            let mut want = r.clone();
            axpy(-dot(&col, &r) / norm_sq(&col), &col, &mut want);
            x = rgs_step(&x, &sys.a, &sys.b, j).unwrap();
            let got = sys.residual(&x).unwrap();
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()));
            }
        }
    }

    #[test]
    fn rgs_incremental_residual_matches_direct() {
        let a = gaussian_matrix(12, 4, 1.0, 5).unwrap();
        let sys = plant_system(&a, 6).unwrap();
        let runner = TrajectoryRunner::new((&sys).into(), Method::Rgs, &[0.0; 4], Sampling::NormSquared).unwrap();
        let t = runner.run(50, 1);
        let x = runner.final_iterate(50, 1);
        assert_relative_eq!(t.error_sq[50], norm_sq(&sys.residual(&x).unwrap()), max_relative = 1e-9);
    }

    #[test]
    fn ineq_from_feasible_start_stays_zero() {
        let sys = make_halfspace_system(&[1.0, 0.0], 1.0).unwrap();
        let t = run_trajectory((&sys).into(), Method::RkIneq, &[0.0, 4.0], 10, Sampling::NormSquared, 0).unwrap();
        assert!(t.error_sq.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn runner_validation() {
        let sys = LinearSystem::new(DenseMatrix::identity(2).unwrap(), vec![1.0, 1.0], None).unwrap();
        assert!(TrajectoryRunner::new((&sys).into(), Method::Rk, &[0.0; 2], Sampling::Uniform).is_err());
        assert!(TrajectoryRunner::new((&sys).into(), Method::Rgs, &[0.0; 2], Sampling::Uniform).is_ok());
        assert!(TrajectoryRunner::new((&sys).into(), Method::RkIneq, &[0.0; 2], Sampling::Uniform).is_err());
        assert!(TrajectoryRunner::new((&sys).into(), Method::Rgs, &[0.0; 3], Sampling::Uniform).is_err());
        assert_eq!("rk-ineq".parse::<Method>().unwrap(), Method::RkIneq);
    }
}
