//! `gen-data`: simulate the surrogate robot and write a windowed dataset.

use std::path::PathBuf;

use clap::Args;

use psr_core::dataset::{generate_dataset, write_dataset};

use crate::config::GlobalConfig;
use crate::error::{CliError, Result};
use crate::output::version_string;

/// Arguments of the `gen-data` subcommand.
#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output dataset file.
    #[arg(long)]
    pub out: PathBuf,
    /// Total logged duration in minutes (overrides the config value).
    #[arg(long)]
    pub minutes: Option<f64>,
    /// RNG seed; the same seed reproduces the file byte for byte.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Runs dataset generation.
pub fn run(args: &GenDataArgs) -> Result<()> {
    let mut cfg = GlobalConfig::load(args.config.as_deref())?;
    if let Some(m) = args.minutes {
        if !(m.is_finite() && m > 0.0) {
            return Err(CliError::Config(format!(
                "--minutes must be a positive number, got {m}"
            )));
        }
        cfg.dataset.total_duration = m * 60.0;
    }
    let dataset = generate_dataset(&cfg.dataset, &cfg.surrogate, args.seed)?;
    write_dataset(&args.out, &dataset)?;
    println!(
        "# {}\ngen-data: seed {} -> {} windows (H={}, T={}, {:.1} min simulated) at {}",
        version_string(),
        args.seed,
        dataset.windows.len(),
        dataset.history_len,
        dataset.horizon,
        cfg.dataset.total_duration / 60.0,
        args.out.display()
    );
    Ok(())
}
