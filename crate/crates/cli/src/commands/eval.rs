//! `eval`: score a checkpoint on held-out windows and probe observer
//! convergence.
//!
//! Writes two artifacts into the output directory: `horizon_curves.csv`
//! (mean 2D position error per prediction step for the learned model and
//! the constant-velocity baseline) and `observer_convergence.json` (median
//! output error decay from randomized initial latents).  Optionally exports
//! raw predicted rollouts as CSV.

use std::path::PathBuf;

use clap::Args;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use psr_core::checkpoint::load_model;
use psr_core::dataset::{command_profile, read_dataset, simulate_trajectory};
use psr_core::observer::observer_unroll;
use psr_core::predictor::predict;
use psr_core::surrogate::Surrogate;
use psr_core::training::{horizon_position_errors, observer_convergence};
use psr_core::types::PlanarPose;

use crate::config::GlobalConfig;
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, fmt_f64, version_string, write_json, CsvReport};

/// Arguments of the `eval` subcommand.
#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Input dataset (held-out windows come from its tail split).
    #[arg(long)]
    pub data: PathBuf,
    /// Predictor checkpoint to evaluate.
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory for the report files.
    #[arg(long)]
    pub out: PathBuf,
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Randomized initial-latent draws for the convergence probe.
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    /// Observer steps measured by the convergence probe.
    #[arg(long, default_value_t = 30)]
    pub steps: usize,
    /// Half-width of the uniform initial-latent distribution.
    #[arg(long, default_value_t = 10.0)]
    pub range: f64,
    /// RNG seed for the convergence probe's stream and draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also export the first N held-out predicted rollouts as CSV.
    #[arg(long)]
    pub rollouts: Option<usize>,
}

/// Runs evaluation.
pub fn run(args: &EvalArgs) -> Result<()> {
    let cfg = GlobalConfig::load(args.config.as_deref())?;
    let dataset = read_dataset(&args.data)?;
    let model = load_model(&args.model)?;
    ensure_dir(&args.out)?;
    let dt = cfg.surrogate.dt;

    println!("# {}", version_string());

    // Held-out windows: the same tail split the training loop uses.  A
    // dataset too small to have a tail is evaluated in full (with a note).
    let (_, mut held_out) = dataset.split(cfg.training.test_fraction);
    if held_out.is_empty() {
        println!("eval: no held-out split at test_fraction {}; evaluating all windows", cfg.training.test_fraction);
        held_out = &dataset.windows;
    }

    let curves = horizon_position_errors(&model, held_out, dt)?;
    let mut csv = CsvReport::new(&["step", "time_s", "learned_mean_m", "cv_mean_m"]);
    for (t, (l, b)) in curves.learned.iter().zip(curves.baseline.iter()).enumerate() {
        csv.row(&[
            (t + 1).to_string(),
            fmt_f64((t + 1) as f64 * dt),
            fmt_f64(*l),
            fmt_f64(*b),
        ]);
    }
    let curves_path = args.out.join("horizon_curves.csv");
    csv.write(&curves_path)?;

    let final_learned = *curves.learned.last().unwrap();
    let final_cv = *curves.baseline.last().unwrap();
    let horizon_s = curves.learned.len() as f64 * dt;
    let ratio = final_learned / final_cv;
    println!(
        "eval: {} held-out windows; mean 2D error at {:.2} s: learned {:.4} m, cv {:.4} m (ratio {:.3}{})",
        held_out.len(),
        horizon_s,
        final_learned,
        final_cv,
        ratio,
        if ratio < 1.0 { "" } else { "; learned not better than cv" }
    );

    // Observer convergence against a freshly simulated measurement stream.
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let surrogate = Surrogate::new(cfg.surrogate.clone())?;
    let stream_steps = (4 * args.steps).max(200);
    let commands = command_profile(&cfg.dataset.profile, stream_steps, dt, &mut rng);
    let log = simulate_trajectory(&surrogate, PlanarPose::default(), &commands, &mut rng);
    let stats = observer_convergence(
        &model.observer,
        &log.measurements,
        &log.commands,
        args.steps,
        args.draws,
        args.range,
        args.seed,
    )?;
    write_json(&args.out.join("observer_convergence.json"), &stats)?;
    println!(
        "eval: observer convergence over {} draws from U[-{}, {}]: median output error {:.4} -> {:.4} after {} steps (ratio {:.4})",
        args.draws, args.range, args.range, stats.initial_median, stats.final_median, stats.steps, stats.ratio
    );

    if let Some(count) = args.rollouts {
        if count == 0 {
            return Err(CliError::Config("--rollouts must be at least 1".into()));
        }
        let mut csv = CsvReport::new(&[
            "sample", "t", "px", "py", "pz", "yaw", "roll", "pitch", "j0", "j1", "j2", "j3",
            "j4", "j5", "j6", "j7", "j8", "j9", "j10", "j11",
        ]);
        for (sample_idx, window) in held_out.iter().take(count).enumerate() {
            let (history_y, history_u) = window.observer_inputs();
            let x0 = DVector::zeros(model.state_dim());
            let x = observer_unroll(&model.observer, &x0, history_y, history_u)?;
            let predictions = predict(&model, &x, window.predictor_commands())?;
            for (t, z) in predictions.iter().enumerate() {
                let v = z.to_vector();
                let mut fields = vec![sample_idx.to_string(), (t + 1).to_string()];
                fields.extend(v.iter().map(|&f| fmt_f64(f)));
                csv.row(&fields);
            }
        }
        csv.write(&args.out.join("rollouts.csv"))?;
    }

    println!("eval: reports written to {}", args.out.display());
    Ok(())
}
