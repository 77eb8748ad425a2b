use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mfbm_lab::{run_to_dir, Config, Experiment};

/// Seeded Monte Carlo experiments for mixed fractional Brownian motion.
///
/// Any configuration key can be overridden after the named flags as
/// `--key value` or `--key=value`, e.g. `--theta.hurst 0.9`.
#[derive(Parser, Debug)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Worker threads (0: one per core). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = cfg.output_dir();
    match run_to_dir(cli.experiment, &cfg, &dir) {
        Ok(report) => {
            print!("{}", report.summary_text());
            println!("wrote {}", dir.display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn build_config(cli: &Cli) -> Result<Config, mfbm_lab::ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(o) = &cli.out {
        cfg.set("out", &o.to_string_lossy())?;
    }
    if let Some(r) = cli.replicates {
        cfg.set("replicates", &r.to_string())?;
    }
    if let Some(w) = cli.workers {
        cfg.set("workers", &w.to_string())?;
    }
    cfg.apply_overrides(&cli.overrides)?;
    Ok(cfg)
}
