//! JSON experiment descriptions. Unknown keys are rejected and every error
//! names the offending field path.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bounds::VarianceForm;
use crate::ensemble::Center;
use crate::error::{Error, Result};
use crate::generate::{gaussian_matrix, normalize, plant_system, sigmas_inverse, sigmas_linear, spectrum_matrix, LinearSystem};
use crate::matrix::{Axis, DenseMatrix};
use crate::mtx::load_matrix_market;
use crate::solvers::{Method, Sampling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaProfile {
    /// `σ_i = 1 - (i-1)/m`
    Linear,
    /// `σ_i = 1/i`
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Profile(SigmaProfile),
    List(Vec<f64>),
}

impl SigmaSpec {
    pub fn values(&self, m: usize, n: usize) -> Vec<f64> {
        match self {
            SigmaSpec::Profile(SigmaProfile::Linear) => sigmas_linear(m, n),
            SigmaSpec::Profile(SigmaProfile::Inverse) => sigmas_inverse(m.min(n)),
            SigmaSpec::List(v) => v.clone(),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MatrixSpec {
    Gaussian {
        m: usize,
        n: usize,
        #[serde(default = "one")]
        std: f64,
        seed: u64,
    },
    Spectrum {
        m: usize,
        n: usize,
        sigma: SigmaSpec,
        seed: u64,
    },
    /// Relative paths are resolved against the config file's directory.
    MtxFile { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalize {
    Row,
    Col,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialIterate {
    #[default]
    Zero,
    Given(Vec<f64>),
}

fn default_method() -> Method {
    Method::Rk
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub x0: InitialIterate,
    /// Seed of the planted solution `x*`.
    #[serde(default)]
    pub plant_seed: u64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            method: Method::Rk,
            sampling: Sampling::NormSquared,
            x0: InitialIterate::Zero,
            plant_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialsSpec {
    pub count: usize,
    pub iterations: usize,
    #[serde(default)]
    pub master_seed: u64,
}

/// Where `μ` comes from in the variance and Chebyshev bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuSource {
    /// Lifted operator norm `μ₂`, computed.
    #[default]
    Computed,
    /// Upper bound `μ <= r`.
    Rate,
}

fn default_eps() -> Vec<f64> {
    vec![0.25, 0.05]
}

fn default_forms() -> Vec<VarianceForm> {
    vec![VarianceForm::Safe]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_forms")]
    pub forms: Vec<VarianceForm>,
    #[serde(default)]
    pub mu: MuSource,
    #[serde(default)]
    pub center: Center,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        BoundsSpec {
            eps: default_eps(),
            forms: default_forms(),
            mu: MuSource::Computed,
            center: Center::Empirical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapSpec {
    pub k: Vec<usize>,
    pub t: Vec<f64>,
}

impl Default for HeatmapSpec {
    fn default() -> Self {
        HeatmapSpec {
            k: vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000],
            t: (0..9).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub matrix: MatrixSpec,
    #[serde(default)]
    pub normalize: Normalize,
    #[serde(default)]
    pub solver: SolverSpec,
    pub trials: TrialsSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub heatmap: Option<HeatmapSpec>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory of the config file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Grid for the `ln μ / ln r` heatmap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuGridConfig {
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub trials: usize,
    #[serde(default = "one")]
    pub std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn config_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Deserializes JSON, reporting failures as `field.path: message`.
pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        config_err(path, format!("{field}: {}", e.into_inner()))
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = parse_json(text, path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        cfg.validate().map_err(|e| config_err(path, e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&read(path)?, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials.count == 0 {
            return Err(Error::invalid("trials.count: must be >= 1"));
        }
        if self.trials.iterations == 0 {
            return Err(Error::invalid("trials.iterations: must be >= 1"));
        }
        if let Some(i) = self.bounds.eps.iter().position(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::invalid(format!("bounds.eps[{i}]: must lie in (0, 1)")));
        }
        match &self.matrix {
            MatrixSpec::Gaussian { m, n, std, .. } => {
                if *m == 0 || *n == 0 {
                    return Err(Error::invalid("matrix: m and n must be >= 1"));
                }
                if !(*std > 0.0) {
                    return Err(Error::invalid("matrix.std: must be positive"));
                }
            }
            MatrixSpec::Spectrum { m, n, sigma, .. } => {
                if *m == 0 || *n == 0 {
                    return Err(Error::invalid("matrix: m and n must be >= 1"));
                }
                if let SigmaSpec::List(v) = sigma {
                    if v.len() != (*m).min(*n) {
                        return Err(Error::invalid(format!(
                            "matrix.sigma: expected {} values, got {}",
                            (*m).min(*n),
                            v.len()
                        )));
                    }
                }
            }
            MatrixSpec::MtxFile { .. } => {}
        }
        if let Some(h) = &self.heatmap {
            if h.k.is_empty() || h.t.is_empty() {
                return Err(Error::invalid("heatmap: k and t lists must be nonempty"));
            }
            if let Some(i) = h.t.iter().position(|t| !(*t > 0.0)) {
                return Err(Error::invalid(format!("heatmap.t[{i}]: must be positive")));
            }
        }
        Ok(())
    }

    /// The matrix after the configured normalization.
    pub fn build_matrix(&self) -> Result<DenseMatrix> {
        let raw = match &self.matrix {
            MatrixSpec::Gaussian { m, n, std, seed } => gaussian_matrix(*m, *n, *std, *seed)?,
            MatrixSpec::Spectrum { m, n, sigma, seed } => spectrum_matrix(*m, *n, &sigma.values(*m, *n), *seed)?,
            MatrixSpec::MtxFile { path } => {
                let resolved = match &self.base_dir {
                    Some(base) if path.is_relative() => base.join(path),
                    _ => path.clone(),
                };
                load_matrix_market(resolved)?
            }
        };
        match self.normalize {
            Normalize::Row => normalize(&raw, Axis::Row),
            Normalize::Col => normalize(&raw, Axis::Col),
            Normalize::None => Ok(raw),
        }
    }

    /// Consistent system with planted `x*`, and the initial iterate.
    pub fn build_system(&self) -> Result<(LinearSystem, Vec<f64>)> {
        if self.solver.method == Method::RkIneq {
            return Err(Error::Unsupported(
                "rk-ineq needs an inequality system; build one with the library API".into(),
            ));
        }
        let a = self.build_matrix()?;
        let sys = plant_system(&a, self.solver.plant_seed)?;
        let x0 = match &self.solver.x0 {
            InitialIterate::Zero => vec![0.0; a.cols()],
            InitialIterate::Given(v) => {
                if v.len() != a.cols() {
                    return Err(Error::Dimension(format!(
                        "solver.x0: expected {} entries, got {}",
                        a.cols(),
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        Ok((sys, x0))
    }

    pub fn heatmap(&self) -> HeatmapSpec {
        self.heatmap.clone().unwrap_or_default()
    }
}

impl MuGridConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let cfg: MuGridConfig = parse_json(text, path)?;
        cfg.validate().map_err(|e| config_err(path, e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&read(path)?, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.m.is_empty() || self.n.is_empty() {
            return Err(Error::invalid("m and n lists must be nonempty"));
        }
        if self.m.contains(&0) || self.n.contains(&0) {
            return Err(Error::invalid("grid sizes must be >= 1"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials: must be >= 1"));
        }
        if !(self.std > 0.0) {
            return Err(Error::invalid("std: must be positive"));
        }
        Ok(())
    }
}
