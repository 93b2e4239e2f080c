//! Experiment runner for hpvem: run configurations, result files and the
//! reproduction of the printed convergence tables.

pub mod config;
pub mod output;
pub mod tables;

use hpvem::adaptivity::{drive, IterationRecord};
use hpvem::Result;

pub use config::{MeshKind, RunConfig};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "HPVEM_THREADS";

/// Solve `cfg.iters` times and write results.csv, results.json and plot.svg
/// into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<Vec<IterationRecord>> {
    cfg.validate()?;
    let records = if cfg.iters == 0 {
        Vec::new()
    } else {
        let mesh = cfg.initial_mesh()?;
        drive(mesh, &cfg.problem(), &cfg.drive_config())?.records
    };
    output::write_all(&cfg.out, cfg, &records)?;
    Ok(records)
}
