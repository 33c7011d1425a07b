use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use stochconc::experiment::{
    cmd_bounds, cmd_gen_matrix, cmd_heatmap_compare, cmd_heatmap_mu, cmd_trials, experiment_preset, mu_grid_preset,
    with_thread_cap, ExperimentConfig, MuGridConfig, EXPERIMENT_PRESETS, MU_GRID_PRESETS,
};

/// Randomized Kaczmarz and Gauss-Seidel ensembles and their concentration bounds.
#[derive(Parser)]
#[command(name = "stochconc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// JSON configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset (see `stochconc presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble of trajectories and write trajectory.csv and summary.csv.
    Trials {
        #[command(flatten)]
        source: Source,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of trials.
        #[arg(long)]
        count: Option<usize>,
        /// Override the number of iterations.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Average log_r(mu) over Gaussian matrices on an (m, n) grid.
    HeatmapMu {
        #[command(flatten)]
        source: Source,
        /// Override the grid seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Use the full-scale preset grid.
        #[arg(long)]
        full: bool,
    },
    /// Compare Chebyshev, Markov and matrix-concentration bounds on a (k, t) grid.
    HeatmapCompare {
        #[command(flatten)]
        source: Source,
    },
    /// Print every bound at a single (k, t, eps).
    Bounds {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        t: f64,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Write the configured matrix as matrix.mtx.
    GenMatrix {
        #[command(flatten)]
        source: Source,
    },
    /// List the available presets.
    Presets,
}

fn experiment(source: &Source) -> Result<ExperimentConfig> {
    match (&source.config, &source.preset) {
        (Some(path), _) => Ok(ExperimentConfig::load(path)?),
        (None, Some(name)) => experiment_preset(name)
            .with_context(|| format!("unknown preset {name:?}; choose one of {}", EXPERIMENT_PRESETS.join(", "))),
        (None, None) => bail!("one of --config or --preset is required"),
    }
}

fn mu_grid(source: &Source, full: bool) -> Result<MuGridConfig> {
    match (&source.config, &source.preset) {
        (Some(path), _) => Ok(MuGridConfig::load(path)?),
        (None, Some(name)) => mu_grid_preset(name, full)
            .with_context(|| format!("unknown preset {name:?}; choose one of {}", MU_GRID_PRESETS.join(", "))),
        (None, None) => bail!("one of --config or --preset is required"),
    }
}

fn out_dir(source: &Source, configured: Option<&PathBuf>, fallback: &str) -> PathBuf {
    source
        .out
        .clone()
        .or_else(|| configured.cloned())
        .unwrap_or_else(|| PathBuf::from("out").join(fallback))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Trials {
            source,
            seed,
            count,
            iterations,
        } => {
            let mut cfg = experiment(&source)?;
            if let Some(s) = seed {
                cfg.trials.master_seed = s;
            }
            if let Some(c) = count {
                cfg.trials.count = c;
            }
            if let Some(k) = iterations {
                cfg.trials.iterations = k;
            }
            let dir = out_dir(&source, cfg.output.as_ref(), "trials");
            let out = with_thread_cap(|| cmd_trials(&cfg, &dir))??;
            eprintln!("wrote {}", out.trajectory_csv.display());
            eprintln!("wrote {}", out.summary_csv.display());
        }
        Command::HeatmapMu { source, seed, full } => {
            let mut grid = mu_grid(&source, full)?;
            if let Some(s) = seed {
                grid.seed = s;
            }
            let dir = out_dir(&source, grid.output.as_ref(), "heatmap-mu");
            let (path, cells) = with_thread_cap(|| cmd_heatmap_mu(&grid, &dir))??;
            for c in cells.iter().filter(|c| c.note.is_some()) {
                eprintln!("warning: m={} n={}: {}", c.m, c.n, c.note.as_deref().unwrap_or(""));
            }
            eprintln!("wrote {}", path.display());
        }
        Command::HeatmapCompare { source } => {
            let cfg = experiment(&source)?;
            let dir = out_dir(&source, cfg.output.as_ref(), "heatmap-compare");
            let (path, _) = with_thread_cap(|| cmd_heatmap_compare(&cfg, &dir))??;
            eprintln!("wrote {}", path.display());
        }
        Command::Bounds {
            source,
            k,
            t,
            eps,
            json,
        } => {
            let cfg = experiment(&source)?;
            let report = with_thread_cap(|| cmd_bounds(&cfg, k, t, eps))??;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render());
            }
        }
        Command::GenMatrix { source } => {
            let cfg = experiment(&source)?;
            let dir = out_dir(&source, cfg.output.as_ref(), "gen-matrix");
            let path = cmd_gen_matrix(&cfg, &dir)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Presets => {
            for p in EXPERIMENT_PRESETS {
                println!("{p}");
            }
            for p in MU_GRID_PRESETS {
                println!("{p}  (heatmap-mu)");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
