//! `verify-stability`: certify and empirically check a checkpoint's
//! contraction condition.
//!
//! Computes the contraction factor `rho = ||A - K C_y||_2 + L_g`.  When
//! `rho >= 1` there is no ultimate bound: the report says so and the
//! process exits nonzero.  Otherwise the certified bounds are checked
//! against simulated worst-case-disturbance trajectories; the report JSON
//! and an error-trace CSV land in the output directory.

use std::path::PathBuf;

use clap::Args;

use psr_core::checkpoint::load_model;
use psr_core::stability::{stability_report, verify_uub};

use crate::config::GlobalConfig;
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, fmt_f64, version_string, write_json, CsvReport};

/// Arguments of the `verify-stability` subcommand.
#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Predictor checkpoint to verify.
    #[arg(long)]
    pub model: PathBuf,
    /// Assumed per-step disturbance bound.
    #[arg(long, default_value_t = 0.01)]
    pub eps_max: f64,
    /// Number of simulated trials.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Steps per trial.
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the report and traces (print-only if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of per-trial error traces to export as CSV.
    #[arg(long, default_value_t = 5)]
    pub traces: usize,
    /// Configuration file (accepted for interface uniformity; verification
    /// reads everything it needs from the checkpoint).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Runs stability verification.
pub fn run(args: &VerifyArgs) -> Result<()> {
    // Load eagerly so a malformed --config fails loudly even though the
    // checkpoint provides all verification inputs.
    let _ = GlobalConfig::load(args.config.as_deref())?;
    let model = load_model(&args.model)?;
    let report = stability_report(&model.observer, args.eps_max);

    println!("# {}", version_string());
    println!(
        "verify-stability: rho = {:.6} (closed loop {:.6} + Lipschitz {:.6}), ||C_y|| = {:.6}",
        report.rho, report.closed_loop_norm, report.lipschitz_bound, report.c_y_norm
    );

    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
    }

    if report.state_bound.is_none() {
        if let Some(dir) = &args.out {
            write_json(&dir.join("stability_report.json"), &report)?;
        }
        println!(
            "verify-stability: no bound (rho = {:.6} >= 1); the error recursion certifies nothing",
            report.rho
        );
        return Err(CliError::NoBound { rho: report.rho });
    }

    println!(
        "verify-stability: certified ultimate bounds: state {:.6}, output {:.6} (eps_max {})",
        report.state_bound.unwrap(),
        report.output_bound.unwrap(),
        args.eps_max
    );

    let mut verification = verify_uub(
        &model.observer,
        args.eps_max,
        args.trials,
        args.steps,
        args.seed,
        true,
    )?;
    let traces = verification.traces.take();

    if let Some(dir) = &args.out {
        write_json(&dir.join("stability_report.json"), &verification)?;
        if let Some(traces) = &traces {
            let mut csv = CsvReport::new(&["trial", "step", "state_error_norm"]);
            for (trial, trace) in traces.iter().take(args.traces).enumerate() {
                for (step, e) in trace.iter().enumerate() {
                    csv.row(&[trial.to_string(), step.to_string(), fmt_f64(*e)]);
                }
            }
            csv.write(&dir.join("error_traces.csv"))?;
        }
    }

    println!(
        "verify-stability: {} trials x {} steps: {} recursion violations, tail sup state {:.6}, tail sup output {:.6}",
        verification.trials,
        verification.steps,
        verification.recursion_violations,
        verification.max_tail_state_error,
        verification.max_tail_output_error
    );

    if verification.holds() {
        println!("verify-stability: PASS (empirical errors within certified bounds)");
        Ok(())
    } else {
        println!("verify-stability: FAIL (empirical errors exceed certified bounds)");
        Err(CliError::Infeasible(
            "empirical ultimate-bound check failed".into(),
        ))
    }
}
