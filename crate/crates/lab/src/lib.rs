//! Experiment harness: configuration, seeded parallel Monte Carlo, rate
//! regressions and report files.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod output;

use std::path::Path;

pub use config::{Config, ConfigError};
pub use experiments::{run_experiment, Experiment, Settings};
pub use fit::{fit_rate, RateFit};
pub use output::{Check, Report};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("experiment failed: {0}")]
    Experiment(#[from] mfbm::Error),
    #[error("writing results: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl RunError {
    /// 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Run `exp` on a pool of `workers` threads (0: one per core).
pub fn run(exp: Experiment, cfg: &Config) -> Result<Report, RunError> {
    let settings = Settings::from_config(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    Ok(pool.install(|| run_experiment(exp, &settings))?)
}

/// Run and write `results.csv`, `summary.txt`, `manifest.txt` and plots under `dir`.
pub fn run_to_dir(exp: Experiment, cfg: &Config, dir: &Path) -> Result<Report, RunError> {
    let report = run(exp, cfg)?;
    output::write_report(dir, cfg, &report)?;
    Ok(report)
}
