//! Named experiment configurations.
//!
//! `fig1` and `fig3a` to `fig3c` drive `trials`; `fig4a` to `fig4c` reuse the
//! same matrices for `heatmap-compare`; `fig4d-synthetic` replaces the
//! tomography matrix by a 1200 x 400 spectrum matrix with geometric singular
//! values and condition number 21.53; `fig2` is the `heatmap-mu` grid.

use crate::bounds::VarianceForm;
use crate::ensemble::Center;
use crate::generate::sigmas_geometric;
use crate::solvers::{Method, Sampling};

use super::config::{
    BoundsSpec, ExperimentConfig, HeatmapSpec, InitialIterate, MatrixSpec, MuGridConfig, MuSource, Normalize,
    SigmaProfile, SigmaSpec, SolverSpec, TrialsSpec,
};

pub const EXPERIMENT_PRESETS: &[&str] = &[
    "fig1",
    "fig3a",
    "fig3b",
    "fig3c",
    "fig4a",
    "fig4b",
    "fig4c",
    "fig4d-synthetic",
];

pub const MU_GRID_PRESETS: &[&str] = &["fig2"];

const PLANT_SEED: u64 = 11;
const MASTER_SEED: u64 = 2024;

fn base(name: &str, matrix: MatrixSpec) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.to_string()),
        matrix,
        normalize: Normalize::None,
        solver: SolverSpec {
            method: Method::Rk,
            sampling: Sampling::NormSquared,
            x0: InitialIterate::Zero,
            plant_seed: PLANT_SEED,
        },
        trials: TrialsSpec {
            count: 500,
            iterations: 100,
            master_seed: MASTER_SEED,
        },
        bounds: BoundsSpec {
            eps: vec![0.25, 0.05],
            forms: vec![VarianceForm::Paper, VarianceForm::Safe],
            mu: MuSource::Rate,
            center: Center::Empirical,
        },
        heatmap: None,
        output: Some(format!("out/{name}").into()),
        base_dir: None,
    }
}

fn well_conditioned() -> MatrixSpec {
    MatrixSpec::Spectrum {
        m: 1000,
        n: 20,
        sigma: SigmaSpec::Profile(SigmaProfile::Linear),
        seed: 1,
    }
}

fn gaussian() -> MatrixSpec {
    MatrixSpec::Gaussian {
        m: 1000,
        n: 20,
        std: 1.0,
        seed: 2,
    }
}

fn ill_conditioned() -> MatrixSpec {
    MatrixSpec::Spectrum {
        m: 1000,
        n: 20,
        sigma: SigmaSpec::Profile(SigmaProfile::Inverse),
        seed: 3,
    }
}

fn tomography_substitute() -> MatrixSpec {
    MatrixSpec::Spectrum {
        m: 1200,
        n: 400,
        sigma: SigmaSpec::List(sigmas_geometric(400, 21.53)),
        seed: 4,
    }
}

pub fn experiment_preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "fig1" | "fig3a" => base(name, well_conditioned()),
        "fig3b" => base(name, gaussian()),
        "fig3c" => base(name, ill_conditioned()),
        "fig4a" | "fig4b" | "fig4c" | "fig4d-synthetic" => {
            let matrix = match name {
                "fig4a" => well_conditioned(),
                "fig4b" => gaussian(),
                "fig4c" => ill_conditioned(),
                _ => tomography_substitute(),
            };
            let mut cfg = base(name, matrix);
            cfg.heatmap = Some(HeatmapSpec::default());
            cfg
        }
        _ => return None,
    };
    Some(cfg)
}

/// `fig2`: row-normalized Gaussian grid. Desk scale uses m, n in
/// {10, 20, 40, 80} with 3 matrices per cell; `full` adds 160 and uses 5.
pub fn mu_grid_preset(name: &str, full: bool) -> Option<MuGridConfig> {
    if name != "fig2" {
        return None;
    }
    let sizes: Vec<usize> = if full {
        vec![10, 20, 40, 80, 160]
    } else {
        vec![10, 20, 40, 80]
    };
    Some(MuGridConfig {
        m: sizes.clone(),
        n: sizes,
        trials: if full { 5 } else { 3 },
        std: 10f64.sqrt(),
        seed: 7,
        output: Some("out/fig2".into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in EXPERIMENT_PRESETS {
            let cfg = experiment_preset(name).unwrap();
            cfg.validate().unwrap();
            let again = ExperimentConfig::from_json(&cfg.to_json(), Path::new("p.json")).unwrap();
            assert_eq!(again.matrix, cfg.matrix);
        }
        let grid = mu_grid_preset("fig2", false).unwrap();
        assert_eq!(grid.trials, 3);
        assert_eq!(mu_grid_preset("fig2", true).unwrap().m.len(), 5);
        assert!(experiment_preset("fig9").is_none());
    }
}
