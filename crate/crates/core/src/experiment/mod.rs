//! JSON-configured experiments and their CSV outputs.

pub mod commands;
pub mod config;
pub mod presets;

pub use commands::{
    cmd_bounds, cmd_gen_matrix, cmd_heatmap_compare, cmd_heatmap_mu, cmd_trials, fmt_num, BoundsReport, CompareCell,
    MuCell, TrialsOutcome,
};
pub use config::{ExperimentConfig, MuGridConfig, MuSource};
pub use presets::{experiment_preset, mu_grid_preset, EXPERIMENT_PRESETS, MU_GRID_PRESETS};

use crate::error::{Error, Result};

/// Caps the worker count when set to a positive integer.
pub const THREADS_ENV: &str = "STOCHCONC_THREADS";

/// Runs `f` on a pool sized by `STOCHCONC_THREADS`, or on the global pool
/// when the variable is unset.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(f());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
