//! Python bindings: matrices, planted systems, single trajectories and
//! ensembles, rate and moment computations, and the experiment commands.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use stochconc::bounds::{self, BoundParams, VarianceForm};
use stochconc::eigen::SpectralOptions;
use stochconc::experiment::{self, ExperimentConfig, MuGridConfig};
use stochconc::{ensemble, generate, mtx, solvers, Axis, Method, Problem, Sampling};

fn err(e: stochconc::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn method(name: &str) -> PyResult<Method> {
    name.parse().map_err(err)
}

fn sampling(name: &str) -> PyResult<Sampling> {
    match name {
        "norm-squared" => Ok(Sampling::NormSquared),
        "uniform" => Ok(Sampling::Uniform),
        _ => Err(PyValueError::new_err(format!(
            "unknown sampling {name:?}; expected norm-squared or uniform"
        ))),
    }
}

fn form(name: &str) -> PyResult<VarianceForm> {
    match name {
        "safe" => Ok(VarianceForm::Safe),
        "paper" => Ok(VarianceForm::Paper),
        _ => Err(PyValueError::new_err(format!("unknown variance form {name:?}"))),
    }
}

/// Dense row-major matrix.
#[pyclass(name = "DenseMatrix", module = "stochconc_py", from_py_object)]
#[derive(Clone)]
pub struct PyDenseMatrix {
    inner: stochconc::DenseMatrix,
}

#[pymethods]
impl PyDenseMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: stochconc::DenseMatrix::from_rows(&rows).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (m, n, seed, std = 1.0))]
    fn gaussian(m: usize, n: usize, seed: u64, std: f64) -> PyResult<Self> {
        Ok(Self {
            inner: generate::gaussian_matrix(m, n, std, seed).map_err(err)?,
        })
    }

    /// `U diag(sigmas) V^T` with Haar-like factors from a seeded Gaussian.
    #[staticmethod]
    fn spectrum(m: usize, n: usize, sigmas: Vec<f64>, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: generate::spectrum_matrix(m, n, &sigmas, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: mtx::load_matrix_market(path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        mtx::save_matrix_market(&self.inner, path).map_err(err)
    }

    /// Copy with unit-norm rows (`"row"`) or columns (`"column"`).
    fn normalized(&self, axis: &str) -> PyResult<Self> {
        let axis = match axis {
            "row" => Axis::Row,
            "column" | "col" => Axis::Col,
            _ => return Err(PyValueError::new_err(format!("unknown axis {axis:?}"))),
        };
        Ok(Self {
            inner: generate::normalize(&self.inner, axis).map_err(err)?,
        })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    fn matvec(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.matvec(&x).map_err(err)
    }

    fn frobenius_sq(&self) -> f64 {
        self.inner.frobenius_sq()
    }

    fn __repr__(&self) -> String {
        let (m, n) = self.inner.shape();
        format!("DenseMatrix({m} x {n})")
    }
}

/// `Ax = b`, with the solution `x_star` when it is known.
#[pyclass(name = "LinearSystem", module = "stochconc_py", from_py_object)]
#[derive(Clone)]
pub struct PyLinearSystem {
    inner: generate::LinearSystem,
}

#[pymethods]
impl PyLinearSystem {
    #[new]
    #[pyo3(signature = (a, b, x_star = None))]
    fn new(a: &PyDenseMatrix, b: Vec<f64>, x_star: Option<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: generate::LinearSystem::new(a.inner.clone(), b, x_star).map_err(err)?,
        })
    }

    /// Consistent system with a seeded Gaussian solution.
    #[staticmethod]
    fn planted(a: &PyDenseMatrix, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: generate::plant_system(&a.inner, seed).map_err(err)?,
        })
    }

    #[getter]
    fn a(&self) -> PyDenseMatrix {
        PyDenseMatrix { inner: self.inner.a.clone() }
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b.clone()
    }

    #[getter]
    fn x_star(&self) -> Option<Vec<f64>> {
        self.inner.x_star.clone()
    }

    /// Runs one trajectory and returns `(error_sq, indices)`.
    #[pyo3(signature = (method, x0, k, seed, sampling = "norm-squared"))]
    fn trajectory(
        &self,
        method: &str,
        x0: Vec<f64>,
        k: usize,
        seed: u64,
        sampling: &str,
    ) -> PyResult<(Vec<f64>, Vec<usize>)> {
        let tr = solvers::run_trajectory(
            Problem::Linear(&self.inner),
            self::method(method)?,
            &x0,
            k,
            self::sampling(sampling)?,
            seed,
        )
        .map_err(err)?;
        Ok((tr.error_sq, tr.indices))
    }

    /// Squared-error trajectories of `n_trials` seeded runs, in trial order.
    #[pyo3(signature = (method, x0, k, n_trials, master_seed, sampling = "norm-squared"))]
    #[allow(clippy::too_many_arguments)]
    fn run_trials(
        &self,
        py: Python<'_>,
        method: &str,
        x0: Vec<f64>,
        k: usize,
        n_trials: usize,
        master_seed: u64,
        sampling: &str,
    ) -> PyResult<Vec<Vec<f64>>> {
        let m = self::method(method)?;
        let s = self::sampling(sampling)?;
        let inner = &self.inner;
        let ens = py
            .detach(|| ensemble::run_trials(Problem::Linear(inner), m, &x0, k, n_trials, s, master_seed))
            .map_err(err)?;
        Ok(ens.trajectories.into_iter().map(|t| t.error_sq).collect())
    }

    /// Exact `E‖e_t‖^{2p}` for `p = 1..=p_max` by enumerating every index
    /// sequence of length `k`.
    #[pyo3(signature = (method, x0, k, p_max, sampling = "norm-squared"))]
    fn exact_moments(
        &self,
        method: &str,
        x0: Vec<f64>,
        k: usize,
        p_max: usize,
        sampling: &str,
    ) -> PyResult<Vec<Vec<f64>>> {
        let bf = ensemble::brute_force_moments(
            Problem::Linear(&self.inner),
            self::method(method)?,
            &x0,
            k,
            p_max,
            self::sampling(sampling)?,
            None,
        )
        .map_err(err)?;
        Ok(bf.moments)
    }
}

/// `r`, `eta`, `rho`, `alpha` and whether `r < 1`.
#[pyfunction]
#[pyo3(signature = (a, method = "rk", sampling = "norm-squared"))]
fn rates(a: &PyDenseMatrix, method: &str, sampling: &str) -> PyResult<BTreeMap<String, f64>> {
    let r = bounds::rates_for(&a.inner, self::method(method)?, self::sampling(sampling)?).map_err(err)?;
    Ok(BTreeMap::from([
        ("r".into(), r.r),
        ("eta".into(), r.eta),
        ("rho".into(), r.rho),
        ("alpha".into(), r.alpha),
        ("contractive".into(), if r.contractive { 1.0 } else { 0.0 }),
    ]))
}

/// Largest eigenvalue `mu_p` of `E[Y^{⊗p}]` on the relevant subspace.
#[pyfunction]
#[pyo3(signature = (a, p = 2, method = "rk", sampling = "norm-squared"))]
fn mu_p(a: &PyDenseMatrix, p: usize, method: &str, sampling: &str) -> PyResult<f64> {
    let family = bounds::family_for(&a.inner, self::method(method)?, self::sampling(sampling)?).map_err(err)?;
    bounds::compute_mu_p(&family, p, &SpectralOptions::default()).map_err(err)
}

/// Variance bound on `‖e_k‖²` for each `k` in `ks`.
#[pyfunction]
#[pyo3(signature = (a, e0_norm_sq, ks, method = "rk", sampling = "norm-squared", form = "safe"))]
fn variance_bounds(
    a: &PyDenseMatrix,
    e0_norm_sq: f64,
    ks: Vec<usize>,
    method: &str,
    sampling: &str,
    form: &str,
) -> PyResult<Vec<f64>> {
    let m = self::method(method)?;
    let s = self::sampling(sampling)?;
    let rates = bounds::rates_for(&a.inner, m, s).map_err(err)?;
    let family = bounds::family_for(&a.inner, m, s).map_err(err)?;
    let params = BoundParams::from_rates(&rates, e0_norm_sq)
        .with_lifted(&family, 2, &SpectralOptions::default())
        .map_err(err)?;
    let f = self::form(form)?;
    Ok(ks.into_iter().map(|k| bounds::variance_bound(&params, k, f)).collect())
}

/// Runs the `trials` command on a JSON config; returns the CSV paths.
#[pyfunction]
fn run_trials_config(py: Python<'_>, config_json: &str, out_dir: PathBuf) -> PyResult<(PathBuf, PathBuf)> {
    let cfg = ExperimentConfig::from_json(config_json, &PathBuf::from("<python>")).map_err(err)?;
    let out = py.detach(|| experiment::cmd_trials(&cfg, &out_dir)).map_err(err)?;
    Ok((out.trajectory_csv, out.summary_csv))
}

/// Runs the `heatmap-mu` command on a JSON grid config; returns the CSV path.
#[pyfunction]
fn run_mu_heatmap_config(py: Python<'_>, config_json: &str, out_dir: PathBuf) -> PyResult<PathBuf> {
    let grid = MuGridConfig::from_json(config_json, &PathBuf::from("<python>")).map_err(err)?;
    let (path, _) = py.detach(|| experiment::cmd_heatmap_mu(&grid, &out_dir)).map_err(err)?;
    Ok(path)
}

/// Text report of every bound at one `(k, t, eps)`.
#[pyfunction]
fn bounds_report(config_json: &str, k: usize, t: f64, eps: f64) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json, &PathBuf::from("<python>")).map_err(err)?;
    Ok(experiment::cmd_bounds(&cfg, k, t, eps).map_err(err)?.render())
}

#[pymodule]
fn stochconc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDenseMatrix>()?;
    m.add_class::<PyLinearSystem>()?;
    m.add_function(wrap_pyfunction!(rates, m)?)?;
    m.add_function(wrap_pyfunction!(mu_p, m)?)?;
    m.add_function(wrap_pyfunction!(variance_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(run_trials_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_mu_heatmap_config, m)?)?;
    m.add_function(wrap_pyfunction!(bounds_report, m)?)?;
    Ok(())
}
