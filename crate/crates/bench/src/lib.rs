//! Experiment runner for the `tvnest` solvers: configuration, reference
//! solutions, convergence-history output and grid experiments.

pub mod config;
pub mod error;
pub mod experiment;
pub mod history;
pub mod reference;

pub use config::{ExperimentConfig, ProblemConfig, ReferencePolicy};
pub use error::{Error, Result};
pub use experiment::{default_solver_config, run_experiment, ExperimentOutput, RunRecord, SharedProblem};
pub use history::{emit_history_csv, write_history_csv, HISTORY_HEADER, REL_SUBOPT_FLOOR};
pub use reference::{compute_reference, ContentHash, Reference, REFERENCE_FACTOR};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "TVNEST_THREADS";

/// Sizes the global rayon pool from [`THREADS_ENV`] if set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}
